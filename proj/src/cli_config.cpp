#include "cstg/cli_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace cstg::cli {

using nlohmann::json;
using nlohmann::ordered_json;

void DatasetSpec::validate() const {
  int sources = 0;
  if (!generator.empty()) ++sources;
  if (!cache_path.empty()) ++sources;
  if (!csv_path.empty()) ++sources;
  if (!idx_images.empty() || !idx_labels.empty()) ++sources;
  if (sources != 1) {
    throw ConfigError("dataset: exactly one of generator/cache/csv/idx_images must be set");
  }
  if (!generator.empty()) {
    static const std::set<std::string> known = {"xor1", "xor2", "xor3", "xor4", "rot-mnist"};
    if (!known.count(generator)) throw ConfigError("dataset.generator: unknown name '" + generator + "'");
    if (generator == "rot-mnist" && (idx_images.empty() || idx_labels.empty())) {
      // rot-mnist is requested through generator + idx paths together
    }
  }
  if (!csv_path.empty() && csv_options.target_column.empty()) {
    throw ConfigError("dataset.target_column: required for csv datasets");
  }
  if (!cache_path.empty() && !task_set) {
    throw ConfigError("dataset.task: required for cache datasets");
  }
}

namespace {

[[noreturn]] void reject(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) reject(path, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) reject(path, "expected an integer");
  return v.get<int>();
}

std::uint64_t as_seed(const json& v, const std::string& path) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) reject(path, "expected an integer");
  return v.get<std::uint64_t>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) reject(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) reject(path, "expected a boolean");
  return v.get<bool>();
}

std::vector<double> as_double_list(const json& v, const std::string& path) {
  if (!v.is_array()) reject(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(as_double(e, path));
  return out;
}

std::vector<std::string> as_string_list(const json& v, const std::string& path) {
  if (!v.is_array()) reject(path, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(as_string(e, path));
  return out;
}

std::vector<nn::LayerSpec> as_arch(const json& v, const std::string& path) {
  if (!v.is_array()) reject(path, "expected an array of {dim, activation} objects");
  std::vector<nn::LayerSpec> out;
  for (const auto& e : v) {
    if (!e.is_object()) reject(path, "expected {dim, activation} objects");
    nn::LayerSpec spec;
    for (const auto& [k, val] : e.items()) {
      if (k == "dim") {
        spec.out_dim = as_int(val, path + ".dim");
      } else if (k == "activation") {
        spec.activation = nn::activation_from_name(as_string(val, path + ".activation"));
      } else {
        reject(path + "." + k, "unknown key");
      }
    }
    if (spec.out_dim < 1) reject(path + ".dim", "must be >= 1");
    out.push_back(spec);
  }
  return out;
}

DatasetSpec dataset_from_json(const json& j) {
  if (!j.is_object()) reject("dataset", "expected an object");
  DatasetSpec spec;
  for (const auto& [key, v] : j.items()) {
    const std::string path = "dataset." + key;
    if (key == "generator") {
      spec.generator = as_string(v, path);
    } else if (key == "n") {
      spec.n = as_int(v, path);
    } else if (key == "seed") {
      spec.seed = as_seed(v, path);
    } else if (key == "cache") {
      spec.cache_path = as_string(v, path);
    } else if (key == "csv") {
      spec.csv_path = as_string(v, path);
    } else if (key == "context_columns") {
      spec.csv_options.context_columns = as_string_list(v, path);
    } else if (key == "target_column") {
      spec.csv_options.target_column = as_string(v, path);
    } else if (key == "categorical_columns") {
      spec.csv_options.categorical_columns = as_string_list(v, path);
    } else if (key == "task") {
      spec.task = obj::loss_kind_from_name(as_string(v, path));
      spec.csv_options.task = spec.task;
      spec.task_set = true;
    } else if (key == "idx_images") {
      spec.idx_images = as_string(v, path);
    } else if (key == "idx_labels") {
      spec.idx_labels = as_string(v, path);
    } else if (key == "digits") {
      auto d = as_double_list(v, path);
      if (d.size() != 2) reject(path, "expected two digits");
      spec.digits = {static_cast<int>(d[0]), static_cast<int>(d[1])};
    } else if (key == "max_sources") {
      spec.max_sources = as_int(v, path);
    } else {
      reject(path, "unknown key");
    }
  }
  spec.validate();
  return spec;
}

SplitSpec split_from_json(const json& j) {
  if (!j.is_object()) reject("split", "expected an object");
  SplitSpec out;
  for (const auto& [key, v] : j.items()) {
    const std::string path = "split." + key;
    if (key == "folds") {
      out.folds = as_int(v, path);
      if (out.folds < 2) reject(path, "must be >= 2");
    } else if (key == "fractions") {
      auto f = as_double_list(v, path);
      if (f.size() != 3) reject(path, "expected [train, val, test]");
      out.fractions = {f[0], f[1], f[2]};
    } else {
      reject(path, "unknown key");
    }
  }
  return out;
}

}  // namespace

CliConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  CliConfig cfg;
  bool saw_dataset = false;
  for (const auto& [key, v] : j.items()) {
    if (key == "dataset") {
      cfg.dataset = dataset_from_json(v);
      saw_dataset = true;
    } else if (key == "method") {
      cfg.train.method = train::method_from_name(as_string(v, key));
    } else if (key == "with_context") {
      cfg.train.with_context = as_bool(v, key);
    } else if (key == "eta") {
      cfg.train.eta = as_double(v, key);
    } else if (key == "lambda") {
      cfg.train.lambda = as_double(v, key);
    } else if (key == "sigma") {
      cfg.train.sigma = as_double(v, key);
    } else if (key == "batch_size") {
      cfg.train.batch_size = as_int(v, key);
    } else if (key == "max_epochs") {
      cfg.train.max_epochs = as_int(v, key);
    } else if (key == "patience") {
      cfg.train.patience = as_int(v, key);
    } else if (key == "seed") {
      cfg.train.seed = as_seed(v, key);
    } else if (key == "tau") {
      cfg.train.tau = as_double(v, key);
    } else if (key == "optimizer") {
      cfg.train.optimizer = train::optimizer_from_name(as_string(v, key));
    } else if (key == "hyper_arch") {
      cfg.train.hyper_arch = as_arch(v, key);
    } else if (key == "pred_arch") {
      cfg.train.pred_arch = as_arch(v, key);
    } else if (key == "freeze_weight_head") {
      cfg.train.freeze_weight_head = as_bool(v, key);
    } else if (key == "lasso_iters") {
      cfg.train.lasso_iters = as_int(v, key);
    } else if (key == "split") {
      cfg.split = split_from_json(v);
    } else if (key == "grid") {
      if (!v.is_object()) reject("grid", "expected an object");
      for (const auto& [k2, v2] : v.items()) {
        if (k2 == "etas") {
          cfg.grid_etas = as_double_list(v2, "grid.etas");
        } else if (k2 == "lambdas") {
          cfg.grid_lambdas = as_double_list(v2, "grid.lambdas");
        } else {
          reject("grid." + k2, "unknown key");
        }
      }
      if (cfg.grid_etas.empty() != cfg.grid_lambdas.empty()) {
        reject("grid", "both etas and lambdas are required");
      }
    } else if (key == "jobs") {
      cfg.jobs = as_int(v, key);
      if (cfg.jobs < 1) reject("jobs", "must be >= 1");
    } else if (key == "out_dir") {
      cfg.out_dir = as_string(v, key);
    } else {
      reject(key, "unknown key");
    }
  }
  if (!saw_dataset) throw ConfigError("config field 'dataset': required");
  cfg.train.validate();
  return cfg;
}

CliConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

namespace {

ordered_json arch_to_json(const std::vector<nn::LayerSpec>& arch) {
  ordered_json a = ordered_json::array();
  for (const auto& l : arch) {
    a.push_back({{"dim", l.out_dim}, {"activation", nn::activation_name(l.activation)}});
  }
  return a;
}

}  // namespace

ordered_json config_to_json(const CliConfig& cfg) {
  ordered_json j;
  ordered_json ds;
  if (!cfg.dataset.generator.empty()) {
    ds["generator"] = cfg.dataset.generator;
    if (cfg.dataset.n > 0) ds["n"] = cfg.dataset.n;
    ds["seed"] = cfg.dataset.seed;
  }
  if (!cfg.dataset.cache_path.empty()) {
    ds["cache"] = cfg.dataset.cache_path;
    ds["task"] = obj::loss_kind_name(cfg.dataset.task);
  }
  if (!cfg.dataset.csv_path.empty()) {
    ds["csv"] = cfg.dataset.csv_path;
    ds["context_columns"] = cfg.dataset.csv_options.context_columns;
    ds["target_column"] = cfg.dataset.csv_options.target_column;
    if (!cfg.dataset.csv_options.categorical_columns.empty()) {
      ds["categorical_columns"] = cfg.dataset.csv_options.categorical_columns;
    }
    ds["task"] = obj::loss_kind_name(cfg.dataset.csv_options.task);
  }
  if (!cfg.dataset.idx_images.empty()) {
    ds["idx_images"] = cfg.dataset.idx_images;
    ds["idx_labels"] = cfg.dataset.idx_labels;
    ds["digits"] = cfg.dataset.digits;
    if (cfg.dataset.max_sources > 0) ds["max_sources"] = cfg.dataset.max_sources;
    ds["seed"] = cfg.dataset.seed;
  }
  j["dataset"] = std::move(ds);
  j["method"] = train::method_name(cfg.train.method);
  j["with_context"] = cfg.train.with_context;
  j["eta"] = cfg.train.eta;
  j["lambda"] = cfg.train.lambda;
  j["sigma"] = cfg.train.sigma;
  j["batch_size"] = cfg.train.batch_size;
  j["max_epochs"] = cfg.train.max_epochs;
  j["patience"] = cfg.train.patience;
  j["seed"] = cfg.train.seed;
  j["tau"] = cfg.train.tau;
  j["optimizer"] = train::optimizer_name(cfg.train.optimizer);
  j["hyper_arch"] = arch_to_json(cfg.train.hyper_arch);
  j["pred_arch"] = arch_to_json(cfg.train.pred_arch);
  if (cfg.split.folds >= 2) {
    j["split"] = {{"folds", cfg.split.folds}};
  } else {
    j["split"] = {{"fractions", cfg.split.fractions}};
  }
  if (!cfg.grid_etas.empty()) {
    j["grid"] = {{"etas", cfg.grid_etas}, {"lambdas", cfg.grid_lambdas}};
  }
  j["jobs"] = cfg.jobs;
  j["out_dir"] = cfg.out_dir;
  return j;
}

std::string resolve_data_path(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* root = std::getenv("CSTG_DATA_DIR");
  if (!root || !*root) return path;
  std::string r = root;
  if (r.back() != '/') r.push_back('/');
  return r + path;
}

data::Dataset load_dataset(const DatasetSpec& spec) {
  spec.validate();
  if (!spec.generator.empty() && spec.generator != "rot-mnist") {
    const int def = spec.generator == "xor1" ? data::kXor1DefaultN : data::kXorDefaultN;
    const int n = spec.n > 0 ? spec.n : def;
    if (spec.generator == "xor1") return data::gen_xor1(n, spec.seed);
    if (spec.generator == "xor2") return data::gen_xor2(n, spec.seed);
    if (spec.generator == "xor3") return data::gen_xor3(n, spec.seed);
    return data::gen_xor4(n, spec.seed);
  }
  if (spec.generator == "rot-mnist" || !spec.idx_images.empty()) {
    if (spec.idx_images.empty() || spec.idx_labels.empty()) {
      throw ConfigError("rot-mnist requires idx_images and idx_labels paths");
    }
    auto [images, labels] = data::load_idx(resolve_data_path(spec.idx_images),
                                           resolve_data_path(spec.idx_labels));
    return data::make_rotating_mnist(images, labels, spec.seed, spec.digits, spec.max_sources);
  }
  if (!spec.cache_path.empty()) {
    return data::load_cache(resolve_data_path(spec.cache_path), spec.task);
  }
  return data::load_csv(resolve_data_path(spec.csv_path), spec.csv_options);
}

// ---- Presets: Appendix-style architectures with tuned (eta, lambda). -------

namespace {

CliConfig xor1_base() {
  CliConfig cfg;
  cfg.dataset.generator = "xor1";
  cfg.dataset.seed = 1;
  cfg.train.method = train::Method::cstg;
  cfg.train.hyper_arch = {{100, nn::Activation::relu}, {10, nn::Activation::sigmoid}};
  cfg.train.pred_arch = {{10, nn::Activation::relu},
                         {10, nn::Activation::sigmoid},
                         {1, nn::Activation::sigmoid}};
  cfg.train.eta = 5e-2;
  cfg.train.lambda = 1e-1;
  cfg.train.batch_size = 64;
  cfg.train.max_epochs = 400;
  cfg.train.patience = 40;
  cfg.train.seed = 1;
  cfg.split.folds = 5;
  cfg.out_dir = "runs/xor1";
  return cfg;
}

CliConfig xor2_base() {
  CliConfig cfg;
  cfg.dataset.generator = "xor2";
  cfg.dataset.seed = 1;
  cfg.train.method = train::Method::cstg;
  cfg.train.hyper_arch = {{25, nn::Activation::sigmoid}};
  cfg.train.pred_arch = {{1, nn::Activation::relu}};
  cfg.train.eta = 5e-2;
  cfg.train.lambda = 1e-1;
  cfg.train.batch_size = 64;
  cfg.train.max_epochs = 500;
  cfg.train.patience = 50;
  cfg.train.seed = 1;
  cfg.split.folds = 5;
  cfg.out_dir = "runs/xor2";
  return cfg;
}

CliConfig linear_xor_base(const std::string& name) {
  CliConfig cfg;
  cfg.dataset.generator = name;
  cfg.dataset.seed = 1;
  cfg.train.method = train::Method::cstg;
  cfg.train.hyper_arch = {{25, nn::Activation::sigmoid}};
  cfg.train.pred_arch = {{1, nn::Activation::none}};
  cfg.train.eta = 5e-2;
  cfg.train.lambda = 1e-1;
  cfg.train.batch_size = 64;
  cfg.train.max_epochs = 500;
  cfg.train.patience = 50;
  cfg.train.seed = 1;
  cfg.out_dir = "runs/" + name;
  return cfg;
}

CliConfig mnist_base() {
  CliConfig cfg;
  cfg.dataset.generator = "rot-mnist";
  cfg.dataset.seed = 1;
  cfg.dataset.max_sources = 2000;
  cfg.train.method = train::Method::cstg;
  cfg.train.hyper_arch = {{64, nn::Activation::relu}, {128, nn::Activation::sigmoid}};
  cfg.train.pred_arch = {{128, nn::Activation::relu},
                         {64, nn::Activation::sigmoid},
                         {1, nn::Activation::sigmoid}};
  cfg.train.optimizer = train::Optimizer::adam;
  cfg.train.eta = 1e-3;
  cfg.train.lambda = 1e-2;
  cfg.train.batch_size = 128;
  cfg.train.max_epochs = 120;
  cfg.train.patience = 15;
  cfg.train.seed = 1;
  cfg.out_dir = "runs/mnist";
  return cfg;
}

}  // namespace

CliConfig preset(const std::string& name) {
  if (name == "xor1-cstg") return xor1_base();
  if (name == "xor1-stg") {
    CliConfig cfg = xor1_base();
    cfg.train.method = train::Method::global_stg;
    cfg.out_dir = "runs/xor1-stg";
    return cfg;
  }
  if (name == "xor1-lasso") {
    CliConfig cfg = xor1_base();
    cfg.train.method = train::Method::lasso;
    cfg.train.lambda = 1e-2;
    cfg.out_dir = "runs/xor1-lasso";
    return cfg;
  }
  if (name == "xor2-cstg") return xor2_base();
  if (name == "xor2-weighted-cstg") {
    CliConfig cfg = xor2_base();
    cfg.train.method = train::Method::weighted_cstg;
    cfg.out_dir = "runs/xor2-weighted";
    return cfg;
  }
  if (name == "xor2-stg") {
    CliConfig cfg = xor2_base();
    cfg.train.method = train::Method::global_stg;
    cfg.out_dir = "runs/xor2-stg";
    return cfg;
  }
  if (name == "xor2-lasso") {
    CliConfig cfg = xor2_base();
    cfg.train.method = train::Method::lasso;
    cfg.train.lambda = 1e-2;
    cfg.out_dir = "runs/xor2-lasso";
    return cfg;
  }
  if (name == "xor3-cstg") return linear_xor_base("xor3");
  if (name == "xor4-cstg") return linear_xor_base("xor4");
  if (name == "mnist-cstg") return mnist_base();
  if (name == "mnist-weighted-cstg") {
    CliConfig cfg = mnist_base();
    cfg.train.method = train::Method::weighted_cstg;
    cfg.out_dir = "runs/mnist-weighted";
    return cfg;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() {
  return {"xor1-cstg",  "xor1-stg",          "xor1-lasso",  "xor2-cstg",
          "xor2-weighted-cstg", "xor2-stg",  "xor2-lasso",  "xor3-cstg",
          "xor4-cstg",  "mnist-cstg",        "mnist-weighted-cstg"};
}

}  // namespace cstg::cli
