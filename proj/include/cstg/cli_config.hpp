#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cstg/dataset.hpp"
#include "cstg/training.hpp"

namespace cstg::cli {

// One dataset source must be set: a named generator, a cached CSV, a generic
// CSV with column declarations, or an IDX pair for rotating MNIST.
struct DatasetSpec {
  std::string generator;  // xor1 | xor2 | xor3 | xor4 | rot-mnist
  int n = 0;              // 0 = generator default
  std::uint64_t seed = 1;
  std::string cache_path;
  std::string csv_path;
  data::CsvOptions csv_options;
  std::string idx_images;
  std::string idx_labels;
  std::array<int, 2> digits{4, 9};
  int max_sources = 0;
  bool task_set = false;
  obj::LossKind task = obj::LossKind::mse;

  void validate() const;
};

struct SplitSpec {
  int folds = 0;  // >= 2 selects cross-validation
  std::array<double, 3> fractions{0.7, 0.15, 0.15};
};

struct CliConfig {
  DatasetSpec dataset;
  train::TrainConfig train;
  SplitSpec split;
  std::vector<double> grid_etas;
  std::vector<double> grid_lambdas;
  int jobs = 1;
  std::string out_dir = "run";
};

// Strict schema: unknown keys are rejected with their JSON path; type
// mismatches name the offending field.
CliConfig config_from_json(const nlohmann::json& j);
CliConfig load_config_file(const std::string& path);
nlohmann::ordered_json config_to_json(const CliConfig& cfg);

// Built-in experiment presets with the published architectures.
CliConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// Resolves a dataset path against CSTG_DATA_DIR when relative.
std::string resolve_data_path(const std::string& path);

data::Dataset load_dataset(const DatasetSpec& spec);

}  // namespace cstg::cli
