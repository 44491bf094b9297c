#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cstg/report.hpp"
#include "cstg/training.hpp"

namespace cstg::repro {

struct MethodRow {
  std::string label;
  double metric_mean = 0.0;
  double metric_std = 0.0;
  std::vector<double> per_fold;
  double mean_count = 0.0;   // mean selected count over contexts (last fold model)
  double union_count = 0.0;  // union over contexts
};

// Per-fold, per-context selected feature sets (sorted indices).
using FoldContextSets = std::vector<std::vector<std::vector<int>>>;

struct XorReport {
  std::vector<MethodRow> rows;
  std::map<std::string, FoldContextSets> sets;  // gate methods only
  std::map<std::string, train::CvResult> cv;
};

// 5-fold reproductions of the XOR benchmarks; writes run artifacts under
// out_dir when non-empty.
XorReport reproduce_xor1(std::uint64_t seed, const std::string& out_dir, int jobs = 1);
XorReport reproduce_xor2(std::uint64_t seed, const std::string& out_dir, int jobs = 1);

struct SupportReport {
  report::GateSummary summary;  // gates for each observed context
  double test_metric = 0.0;
  train::TrainResult result;
};

SupportReport reproduce_xor3(std::uint64_t seed, const std::string& out_dir);
SupportReport reproduce_xor4(std::uint64_t seed, const std::string& out_dir);

struct Theorem34Avg {
  std::vector<report::Theorem34Report> runs;
  double mean_gap = 0.0;
};

Theorem34Avg reproduce_theorem34(std::uint64_t seed, const std::string& out_dir,
                                 int num_seeds = 5);

struct MnistReport {
  double test_accuracy = 0.0;
  int sources_used = 0;
  train::TrainResult result;
};

MnistReport reproduce_mnist(const std::string& idx_images, const std::string& idx_labels,
                            std::uint64_t seed, const std::string& out_dir,
                            train::Method method = train::Method::cstg, int max_sources = 2000);

// Matched-grid comparison backing the risk-dominance check: best validation
// risk (loss + lambda * expected open gates) per method over the same grid.
struct RiskComparison {
  double best_cstg_risk = 0.0;
  double best_stg_risk = 0.0;
};

RiskComparison compare_cstg_vs_stg(const std::string& dataset, std::uint64_t seed,
                                   const std::vector<double>& etas,
                                   const std::vector<double>& lambdas, int jobs = 1);

}  // namespace cstg::repro
