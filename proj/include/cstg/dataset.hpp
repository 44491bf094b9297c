#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cstg/matrix.hpp"
#include "cstg/objective.hpp"

namespace cstg::data {

// Aligned triples (x explanatory features, z context, y target) plus the
// bookkeeping some generators carry (raw context id, stored noise, source
// grouping for leakage-free splits).
struct Dataset {
  Matrix x;  // n x D
  Matrix z;  // n x L
  std::vector<double> y;
  obj::LossKind task = obj::LossKind::mse;
  std::vector<std::string> feature_names;
  std::vector<std::string> context_names;
  std::vector<int> context_id;  // raw categorical context (empty when inapplicable)
  std::vector<double> eta;      // additive noise draws (xor3/xor4)
  std::vector<int> group;       // rows sharing a group never straddle a split

  int n() const { return x.rows; }
  int feature_dim() const { return x.cols; }
  int context_dim() const { return z.cols; }
  Dataset take_rows(const std::vector<int>& idx) const;
  void validate() const;
};

Dataset gen_xor1(int n, std::uint64_t seed);
Dataset gen_xor2(int n, std::uint64_t seed);
Dataset gen_xor3(int n, std::uint64_t seed);
Dataset gen_xor4(int n, std::uint64_t seed);

constexpr int kXor1DefaultN = 1500;
constexpr int kXorDefaultN = 1000;

struct IdxImages {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> pixels;  // scaled to [0, 1], row-major per image
};

IdxImages load_idx_images(const std::string& path);
std::vector<int> load_idx_labels(const std::string& path);
// Loads both files and checks the counts agree.
std::pair<IdxImages, std::vector<int>> load_idx(const std::string& images_path,
                                                const std::string& labels_path);

// Keeps the requested digits, emits 8 copies per source image rotated by
// k*45 degrees (bilinear, about the image center, out-of-frame = 0);
// z = one-hot rotation index, y = 1 for the second digit. Source order is
// shuffled by seed; rows carry their source image as a split group.
// max_sources > 0 caps the number of source images kept.
Dataset make_rotating_mnist(const IdxImages& images, const std::vector<int>& labels,
                            std::uint64_t seed, std::array<int, 2> digits = {4, 9},
                            int max_sources = 0);

struct CsvOptions {
  std::vector<std::string> context_columns;
  std::string target_column;
  obj::LossKind task = obj::LossKind::mse;
  std::vector<std::string> categorical_columns;  // expanded to one-hot before assembly
};

Dataset load_csv(const std::string& path, const CsvOptions& opts);

// Dataset cache: CSV with reserved column prefixes x_, z_, y (plus optional
// eta / group columns). Round-trips doubles exactly.
void write_cache(const Dataset& ds, const std::string& path);
Dataset load_cache(const std::string& path, obj::LossKind task);

struct SplitPlan {
  std::uint64_t seed = 0;
  int folds = 0;  // >= 2 selects k-fold; otherwise fractions apply
  std::array<double, 3> fractions{0.7, 0.15, 0.15};
};

struct TrainValTest {
  std::vector<int> train, val, test;
};

// Disjoint, exhaustive, deterministic under seed; stratified by label for
// bce tasks; group-aware when the dataset defines groups.
std::vector<std::vector<int>> kfold_split(const Dataset& ds, int folds, std::uint64_t seed);
TrainValTest fraction_split(const Dataset& ds, std::array<double, 3> fractions,
                            std::uint64_t seed);

}  // namespace cstg::data
