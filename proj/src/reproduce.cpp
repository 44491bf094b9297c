#include "cstg/reproduce.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "cstg/cli_config.hpp"

namespace cstg::repro {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

// Distinct observed contexts, ordered by raw context id when the generator
// recorded one, otherwise by first occurrence (capped).
Matrix distinct_contexts(const data::Dataset& ds, int cap = 64) {
  std::vector<std::vector<double>> rows;
  if (!ds.context_id.empty()) {
    std::map<int, std::vector<double>> by_id;
    for (int i = 0; i < ds.n(); ++i) by_id.emplace(ds.context_id[i], ds.z.row(i));
    for (auto& [id, row] : by_id) rows.push_back(row);
  } else {
    for (int i = 0; i < ds.n() && static_cast<int>(rows.size()) < cap; ++i) {
      auto row = ds.z.row(i);
      bool seen = false;
      for (const auto& r : rows) seen = seen || r == row;
      if (!seen) rows.push_back(std::move(row));
    }
  }
  Matrix m(static_cast<int>(rows.size()), ds.context_dim());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < ds.context_dim(); ++j) m.at(static_cast<int>(i), j) = rows[i][j];
  return m;
}

MethodRow cv_row(const std::string& label, const train::CvResult& cv) {
  MethodRow row;
  row.label = label;
  row.mean_count = 0.0;
  row.metric_mean = cv.mean;
  row.metric_std = cv.stddev;
  row.per_fold = cv.per_fold;
  return row;
}

FoldContextSets fold_sets(const train::CvResult& cv, const Matrix& contexts, double tau) {
  FoldContextSets out;
  for (const auto& res : cv.fold_results) {
    std::vector<std::vector<int>> per_context;
    for (int c = 0; c < contexts.rows; ++c) {
      auto sel = gates::select_features(*res.gate_model, contexts.row(c), tau);
      per_context.push_back(sel.indices);
    }
    out.push_back(std::move(per_context));
  }
  return out;
}

void attach_counts(MethodRow& row, const train::CvResult& cv, const Matrix& contexts, double tau) {
  // counts averaged over folds, per Table-2 style
  double mean_sum = 0.0, union_sum = 0.0;
  for (const auto& res : cv.fold_results) {
    report::GateSummary s = report::gate_summary(*res.gate_model, contexts, tau);
    mean_sum += s.mean_count;
    union_sum += s.union_count;
  }
  row.mean_count = mean_sum / static_cast<double>(cv.fold_results.size());
  row.union_count = union_sum / static_cast<double>(cv.fold_results.size());
}

void write_xor_outputs(const std::string& out_dir, const data::Dataset& ds,
                       const XorReport& report_out, const std::string& main_label,
                       double tau) {
  if (out_dir.empty()) return;
  ensure_dir(out_dir);
  const auto& cv = report_out.cv.at(main_label);
  const Matrix contexts = distinct_contexts(ds);
  // metrics.json from the main method's folds
  const MethodRow* main_row = nullptr;
  for (const auto& row : report_out.rows) {
    if (row.label == main_label) main_row = &row;
  }
  const std::string metric_name = ds.task == obj::LossKind::bce ? "accuracy" : "r2";
  auto metrics =
      report::metrics_json(metric_name, main_row->metric_mean, main_row->metric_std,
                           main_row->per_fold);
  write_text(out_dir + "/metrics.json", metrics.dump(2) + "\n");
  // gates + plot data from the last fold's model
  const auto& model = cv.fold_results.back();
  report::GateSummary summary = report::gate_summary(*model.gate_model, contexts, tau);
  std::ofstream gates_csv(out_dir + "/gates.csv");
  report::write_gates_csv(summary, gates_csv);
  std::ofstream plot_csv(out_dir + "/plot_gates.csv");
  report::write_plot_csv(summary, plot_csv);
}

XorReport reproduce_xor_cv(const std::string& dataset, std::uint64_t seed,
                           const std::string& out_dir, int jobs,
                           const std::vector<std::string>& presets,
                           const std::string& main_label) {
  XorReport out;
  data::Dataset ds;
  double tau = 0.5;
  for (const auto& preset_name : presets) {
    cli::CliConfig cfg = cli::preset(preset_name);
    cfg.dataset.seed = seed;
    cfg.train.seed = seed;
    ds = cli::load_dataset(cfg.dataset);
    tau = cfg.train.tau;
    train::CvResult cv = train::cross_validate(ds, cfg.train, cfg.split.folds ? cfg.split.folds : 5, jobs);
    std::string label = train::method_name(cfg.train.method);
    MethodRow row = cv_row(label, cv);
    if (cv.fold_results.front().gate_model) {
      const Matrix contexts = distinct_contexts(ds);
      out.sets[label] = fold_sets(cv, contexts, tau);
      attach_counts(row, cv, contexts, tau);
    }
    out.rows.push_back(std::move(row));
    out.cv.emplace(label, std::move(cv));
  }
  (void)dataset;
  write_xor_outputs(out_dir, ds, out, main_label, tau);
  return out;
}

}  // namespace

XorReport reproduce_xor1(std::uint64_t seed, const std::string& out_dir, int jobs) {
  return reproduce_xor_cv("xor1", seed, out_dir, jobs, {"xor1-cstg", "xor1-lasso"}, "cstg");
}

XorReport reproduce_xor2(std::uint64_t seed, const std::string& out_dir, int jobs) {
  return reproduce_xor_cv("xor2", seed, out_dir, jobs,
                          {"xor2-weighted-cstg", "xor2-cstg", "xor2-lasso"}, "weighted_cstg");
}

namespace {

SupportReport reproduce_support(const std::string& preset_name, std::uint64_t seed,
                                const std::string& out_dir) {
  cli::CliConfig cfg = cli::preset(preset_name);
  cfg.dataset.seed = seed;
  cfg.train.seed = seed;
  data::Dataset ds = cli::load_dataset(cfg.dataset);
  auto tvt = data::fraction_split(ds, cfg.split.fractions, cfg.train.seed);
  SupportReport out;
  out.result = train::train(ds.take_rows(tvt.train), ds.take_rows(tvt.val), cfg.train);
  out.test_metric = out.result.eval_metric(ds.take_rows(tvt.test));
  const Matrix contexts = distinct_contexts(ds);
  out.summary = report::gate_summary(*out.result.gate_model, contexts, cfg.train.tau);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    std::ofstream gates_csv(out_dir + "/gates.csv");
    report::write_gates_csv(out.summary, gates_csv);
    std::ofstream plot_csv(out_dir + "/plot_gates.csv");
    report::write_plot_csv(out.summary, plot_csv);
    auto metrics = report::metrics_json("r2", out.test_metric, 0.0, {out.test_metric});
    write_text(out_dir + "/metrics.json", metrics.dump(2) + "\n");
  }
  return out;
}

}  // namespace

SupportReport reproduce_xor3(std::uint64_t seed, const std::string& out_dir) {
  return reproduce_support("xor3-cstg", seed, out_dir);
}

SupportReport reproduce_xor4(std::uint64_t seed, const std::string& out_dir) {
  return reproduce_support("xor4-cstg", seed, out_dir);
}

Theorem34Avg reproduce_theorem34(std::uint64_t seed, const std::string& out_dir, int num_seeds) {
  Theorem34Avg out;
  for (int s = 0; s < num_seeds; ++s) {
    out.runs.push_back(report::theorem34_experiment(seed + static_cast<std::uint64_t>(s)));
    out.mean_gap += out.runs.back().max_abs_gap;
  }
  out.mean_gap /= static_cast<double>(num_seeds);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    nlohmann::ordered_json j;
    j["mean_max_abs_gap"] = out.mean_gap;
    j["runs"] = nlohmann::ordered_json::array();
    for (const auto& run : out.runs) {
      j["runs"].push_back({{"mu_stg", run.mu_stg},
                           {"mean_mu_cstg", run.mean_mu_cstg},
                           {"max_abs_gap", run.max_abs_gap}});
    }
    write_text(out_dir + "/theorem34.json", j.dump(2) + "\n");
  }
  return out;
}

MnistReport reproduce_mnist(const std::string& idx_images, const std::string& idx_labels,
                            std::uint64_t seed, const std::string& out_dir,
                            train::Method method, int max_sources) {
  cli::CliConfig cfg = cli::preset(method == train::Method::weighted_cstg ? "mnist-weighted-cstg"
                                                                          : "mnist-cstg");
  cfg.dataset.idx_images = idx_images;
  cfg.dataset.idx_labels = idx_labels;
  cfg.dataset.seed = seed;
  cfg.dataset.max_sources = max_sources;
  cfg.train.seed = seed;
  data::Dataset ds = cli::load_dataset(cfg.dataset);
  auto tvt = data::fraction_split(ds, cfg.split.fractions, cfg.train.seed);
  MnistReport out;
  out.sources_used = max_sources;
  out.result = train::train(ds.take_rows(tvt.train), ds.take_rows(tvt.val), cfg.train);
  out.test_accuracy = out.result.eval_metric(ds.take_rows(tvt.test));
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    auto metrics = report::metrics_json("accuracy", out.test_accuracy, 0.0, {out.test_accuracy});
    write_text(out_dir + "/metrics.json", metrics.dump(2) + "\n");
    const Matrix contexts = distinct_contexts(ds);
    report::GateSummary summary =
        report::gate_summary(*out.result.gate_model, contexts, cfg.train.tau);
    std::ofstream gates_csv(out_dir + "/gates.csv");
    report::write_gates_csv(summary, gates_csv);
  }
  return out;
}

RiskComparison compare_cstg_vs_stg(const std::string& dataset, std::uint64_t seed,
                                   const std::vector<double>& etas,
                                   const std::vector<double>& lambdas, int jobs) {
  cli::CliConfig base = cli::preset(dataset == "xor1" ? "xor1-cstg" : "xor2-cstg");
  base.dataset.seed = seed;
  base.train.seed = seed;
  data::Dataset ds = cli::load_dataset(base.dataset);

  auto best_risk = [&](train::Method method) {
    train::TrainConfig cfg = base.train;
    cfg.method = method;
    train::GridResult grid = train::grid_search(ds, cfg, etas, lambdas, jobs);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& cell : grid.cells) {
      if (!cell.diverged) best = std::min(best, cell.val_risk);
    }
    return best;
  };

  RiskComparison out;
  out.best_cstg_risk = best_risk(train::Method::cstg);
  out.best_stg_risk = best_risk(train::Method::global_stg);
  return out;
}

}  // namespace cstg::repro
