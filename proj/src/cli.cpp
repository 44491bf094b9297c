#include "cstg/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "cstg/report.hpp"
#include "cstg/reproduce.hpp"

namespace cstg::cli {

namespace fs = std::filesystem;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config: return kExitUsage;
    case ErrorKind::io:
    case ErrorKind::format: return kExitIo;
    default: return kExitRuntime;
  }
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

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

void write_history_csv(const std::string& path, const train::TrainResult& res) {
  std::ostringstream os;
  os << "epoch,train_risk,val_metric,expected_open_gates\n";
  for (const auto& e : res.history) {
    os << e.epoch << ',' << fmt17(e.train_risk) << ',' << fmt17(e.val_loss) << ','
       << fmt17(e.expected_open_gates) << '\n';
  }
  write_text(path, os.str());
}

nlohmann::ordered_json model_json(const train::TrainResult& res) {
  nlohmann::ordered_json j;
  j["format"] = "cstg-model-v1";
  j["method"] = train::method_name(res.config.method);
  j["task"] = obj::loss_kind_name(res.task);
  j["with_context"] = res.config.with_context;
  j["tau"] = res.config.tau;
  if (res.gate_model) j["gate_model"] = gates::gate_model_to_json(*res.gate_model);
  j["predictor"] = nn::mlp_to_json(res.predictor);
  return j;
}

void write_gates_outputs(const std::string& dir, const train::TrainResult& res,
                         const data::Dataset& ds) {
  if (!res.gate_model) return;
  report::GateSummary summary =
      report::gate_summary(*res.gate_model, distinct_contexts(ds), res.config.tau);
  std::ofstream gates_csv(dir + "/gates.csv");
  if (!gates_csv) throw IoError("cannot write " + dir + "/gates.csv");
  report::write_gates_csv(summary, gates_csv);
  std::ofstream plot_csv(dir + "/plot_gates.csv");
  if (!plot_csv) throw IoError("cannot write " + dir + "/plot_gates.csv");
  report::write_plot_csv(summary, plot_csv);
}

void write_grid_table(const std::string& path, const train::GridResult& grid) {
  std::ostringstream os;
  os << "eta,lambda,val_metric,expected_open_gates,diverged\n";
  for (const auto& c : grid.cells) {
    os << fmt17(c.eta) << ',' << fmt17(c.lambda) << ',' << fmt17(c.val_loss) << ','
       << fmt17(c.expected_open_gates) << ',' << (c.diverged ? 1 : 0) << '\n';
  }
  write_text(path, os.str());
}

}  // namespace

void run_train_config(const CliConfig& cfg_in, std::ostream& log) {
  CliConfig cfg = cfg_in;
  data::Dataset ds = load_dataset(cfg.dataset);
  if (cfg.train.method != train::Method::lasso && cfg.train.method != train::Method::plain &&
      cfg.train.hyper_arch.empty() && cfg.train.method != train::Method::global_stg) {
    throw ConfigError("hyper_arch is required for conditional gate methods");
  }
  ensure_dir(cfg.out_dir);

  if (!cfg.grid_etas.empty()) {
    train::GridResult grid =
        train::grid_search(ds, cfg.train, cfg.grid_etas, cfg.grid_lambdas, cfg.jobs);
    write_grid_table(cfg.out_dir + "/grid_table.csv", grid);
    cfg.train = grid.best_config;
    log << "grid: selected eta=" << cfg.train.eta << " lambda=" << cfg.train.lambda << "\n";
  }
  write_text(cfg.out_dir + "/config.json", config_to_json(cfg).dump(2) + "\n");

  const std::string metric_name = ds.task == obj::LossKind::bce ? "accuracy" : "r2";
  if (cfg.split.folds >= 2) {
    train::CvResult cv = train::cross_validate(ds, cfg.train, cfg.split.folds, cfg.jobs);
    auto metrics = report::metrics_json(metric_name, cv.mean, cv.stddev, cv.per_fold);
    write_text(cfg.out_dir + "/metrics.json", metrics.dump(2) + "\n");
    const train::TrainResult& exported = cv.fold_results.back();
    write_history_csv(cfg.out_dir + "/history.csv", exported);
    write_text(cfg.out_dir + "/model.json", model_json(exported).dump(2) + "\n");
    write_gates_outputs(cfg.out_dir, exported, ds);
    log << metric_name << ": " << cv.mean << " (" << cv.stddev << ") over " << cfg.split.folds
        << " folds\n";
  } else {
    auto tvt = data::fraction_split(ds, cfg.split.fractions, cfg.train.seed);
    train::TrainResult res =
        train::train(ds.take_rows(tvt.train), ds.take_rows(tvt.val), cfg.train);
    const double metric = res.eval_metric(ds.take_rows(tvt.test));
    auto metrics = report::metrics_json(metric_name, metric, 0.0, {metric});
    write_text(cfg.out_dir + "/metrics.json", metrics.dump(2) + "\n");
    write_history_csv(cfg.out_dir + "/history.csv", res);
    write_text(cfg.out_dir + "/model.json", model_json(res).dump(2) + "\n");
    write_gates_outputs(cfg.out_dir, res, ds);
    log << metric_name << ": " << metric << "\n";
  }
  log << "run directory: " << cfg.out_dir << "\n";
}

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset_name;
  std::string out_dir;
  std::int64_t seed = -1;
  int jobs = 0;
  double tau = -1.0;
  std::string images, labels;
};

void apply_overrides(CliConfig& cfg, const CommonFlags& flags) {
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed >= 0) {
    cfg.train.seed = static_cast<std::uint64_t>(flags.seed);
    cfg.dataset.seed = static_cast<std::uint64_t>(flags.seed);
  }
  if (flags.jobs > 0) cfg.jobs = flags.jobs;
  if (flags.tau >= 0.0) cfg.train.tau = flags.tau;
  if (!flags.images.empty()) cfg.dataset.idx_images = flags.images;
  if (!flags.labels.empty()) cfg.dataset.idx_labels = flags.labels;
}

int cmd_generate(const std::string& name, const std::string& out_path, std::uint64_t seed, int n,
                 const std::string& images, const std::string& labels, std::ostream& out) {
  DatasetSpec spec;
  spec.generator = name;
  spec.seed = seed;
  spec.n = n;
  if (name == "rot-mnist") {
    if (images.empty() || labels.empty()) {
      throw ConfigError("generate rot-mnist requires --images and --labels");
    }
    spec.idx_images = images;
    spec.idx_labels = labels;
  }
  data::Dataset ds = load_dataset(spec);
  const std::string resolved = resolve_data_path(out_path);
  data::write_cache(ds, resolved);
  out << "wrote " << resolved << ": " << ds.n() << " rows, " << ds.feature_dim()
      << " features, " << ds.context_dim() << " context columns\n";
  return kExitOk;
}

int cmd_gates(const std::string& checkpoint, const std::string& contexts_csv, double tau,
              const std::string& out_path, std::ostream& out) {
  std::ifstream in(checkpoint);
  if (!in) throw IoError("cannot open checkpoint " + checkpoint);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + checkpoint + ": " + e.what());
  }
  if (!j.contains("gate_model")) {
    throw ConfigError("checkpoint " + checkpoint + " has no gate_model (method '" +
                      j.value("method", "?") + "')");
  }
  ad::Graph g;
  gates::GateModel gm = gates::gate_model_from_json(g, j.at("gate_model"));
  const double use_tau = tau >= 0.0 ? tau : j.value("tau", 0.5);

  // contexts: CSV whose rows are context vectors; a non-numeric first line
  // is treated as a header.
  std::ifstream cin_file(contexts_csv);
  if (!cin_file) throw IoError("cannot open contexts " + contexts_csv);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(cin_file, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    bool numeric = true;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) numeric = false;
      } catch (...) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw DataError(contexts_csv + ": non-numeric context row");
    }
    first = false;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(contexts_csv + ": no context rows");
  const int width = gm.kind == gates::GateKind::global_stg ? static_cast<int>(rows.front().size())
                                                           : gm.context_dim();
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != width) {
      throw ConfigError(contexts_csv + ": context width " + std::to_string(row.size()) +
                        " does not match checkpoint width " + std::to_string(width));
    }
  }
  Matrix contexts(static_cast<int>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < width; ++c) contexts.at(static_cast<int>(i), c) = rows[i][c];

  report::GateSummary summary = report::gate_summary(gm, contexts, use_tau);
  if (out_path.empty()) {
    report::write_gates_csv(summary, out);
  } else {
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot write " + out_path);
    report::write_gates_csv(summary, f);
  }
  return kExitOk;
}

std::string set_str(const std::vector<int>& v) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i] + 1;  // report 1-based feature ids
  }
  os << '}';
  return os.str();
}

void print_xor_report(const repro::XorReport& rep, const std::string& metric_label,
                      std::ostream& out) {
  for (const auto& row : rep.rows) {
    out << row.label << ": " << metric_label << " = " << row.metric_mean << " ("
        << row.metric_std << ")";
    if (rep.sets.count(row.label)) {
      out << ", mean selected " << row.mean_count << ", union " << row.union_count;
    }
    out << "\n";
  }
  for (const auto& [label, folds] : rep.sets) {
    out << label << " selected sets per fold (1-based):\n";
    for (std::size_t f = 0; f < folds.size(); ++f) {
      out << "  fold " << f << ':';
      for (const auto& ctx : folds[f]) out << ' ' << set_str(ctx);
      out << "\n";
    }
  }
}

int cmd_reproduce(const std::string& experiment, const CommonFlags& flags, std::ostream& out) {
  const std::uint64_t seed = flags.seed >= 0 ? static_cast<std::uint64_t>(flags.seed) : 1;
  const int jobs = flags.jobs > 0 ? flags.jobs : 1;
  std::string out_dir = flags.out_dir.empty() ? "runs/" + experiment : flags.out_dir;
  if (experiment == "xor1") {
    repro::XorReport rep = repro::reproduce_xor1(seed, out_dir, jobs);
    print_xor_report(rep, "accuracy %", out);
  } else if (experiment == "xor2") {
    repro::XorReport rep = repro::reproduce_xor2(seed, out_dir, jobs);
    print_xor_report(rep, "R^2", out);
  } else if (experiment == "xor3" || experiment == "xor4") {
    repro::SupportReport rep = experiment == "xor3" ? repro::reproduce_xor3(seed, out_dir)
                                                    : repro::reproduce_xor4(seed, out_dir);
    out << "cstg: R^2 = " << rep.test_metric << "\n";
    for (std::size_t c = 0; c < rep.summary.contexts.size(); ++c) {
      out << "z=" << c << " selected " << set_str(rep.summary.contexts[c].selected) << " gates:";
      for (double gv : rep.summary.contexts[c].gate) out << ' ' << gv;
      out << "\n";
    }
  } else if (experiment == "theorem34") {
    repro::Theorem34Avg rep = repro::reproduce_theorem34(seed, out_dir);
    out << "max_abs_gap mean over " << rep.runs.size() << " seeds: " << rep.mean_gap << "\n";
    for (const auto& run : rep.runs) out << "  gap " << run.max_abs_gap << "\n";
  } else if (experiment == "mnist") {
    if (flags.images.empty() || flags.labels.empty()) {
      throw ConfigError("reproduce mnist requires --images and --labels");
    }
    repro::MnistReport rep =
        repro::reproduce_mnist(flags.images, flags.labels, seed, out_dir);
    out << "cstg: accuracy % = " << rep.test_accuracy << " (" << rep.sources_used
        << " source images)\n";
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  out << "outputs: " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conditional stochastic gates: contextual feature selection"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a dataset cache CSV");
  std::string gen_name, gen_out = "dataset.csv", gen_images, gen_labels;
  std::int64_t gen_seed = 1;
  int gen_n = 0;
  gen->add_option("dataset", gen_name, "xor1|xor2|xor3|xor4|rot-mnist")->required();
  gen->add_option("--out", gen_out, "Output CSV path");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--n", gen_n, "Sample count (0 = dataset default)");
  gen->add_option("--images", gen_images, "IDX images path (rot-mnist)");
  gen->add_option("--labels", gen_labels, "IDX labels path (rot-mnist)");

  // train
  auto* tr = app.add_subcommand("train", "Train from a JSON config or preset");
  CommonFlags tr_flags;
  tr->add_option("--config", tr_flags.config_path, "JSON config path");
  tr->add_option("--preset", tr_flags.preset_name, "Preset name");
  tr->add_option("--out", tr_flags.out_dir, "Run directory");
  tr->add_option("--seed", tr_flags.seed, "Seed override");
  tr->add_option("--jobs", tr_flags.jobs, "Parallel folds/grid cells");
  tr->add_option("--tau", tr_flags.tau, "Selection threshold override");
  tr->add_option("--images", tr_flags.images, "IDX images path");
  tr->add_option("--labels", tr_flags.labels, "IDX labels path");

  // gates
  auto* ga = app.add_subcommand("gates", "Query eval-mode gates for contexts");
  std::string ga_checkpoint, ga_contexts, ga_out;
  double ga_tau = -1.0;
  ga->add_option("--checkpoint", ga_checkpoint, "model.json path")->required();
  ga->add_option("--contexts", ga_contexts, "CSV of context rows")->required();
  ga->add_option("--tau", ga_tau, "Selection threshold (default: checkpoint's)");
  ga->add_option("--out", ga_out, "Output path (default stdout)");

  // reproduce
  auto* re = app.add_subcommand("reproduce", "Run a benchmark reproduction");
  std::string re_name;
  CommonFlags re_flags;
  re->add_option("experiment", re_name, "xor1|xor2|xor3|xor4|theorem34|mnist")->required();
  re->add_option("--out", re_flags.out_dir, "Output directory");
  re->add_option("--seed", re_flags.seed, "Seed");
  re->add_option("--jobs", re_flags.jobs, "Parallel folds");
  re->add_option("--tau", re_flags.tau, "Selection threshold");
  re->add_option("--images", re_flags.images, "IDX images path (mnist)");
  re->add_option("--labels", re_flags.labels, "IDX labels path (mnist)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      return cmd_generate(gen_name, gen_out, static_cast<std::uint64_t>(gen_seed), gen_n,
                          gen_images, gen_labels, out);
    }
    if (tr->parsed()) {
      if (tr_flags.config_path.empty() == tr_flags.preset_name.empty()) {
        throw ConfigError("train requires exactly one of --config or --preset");
      }
      CliConfig cfg = tr_flags.preset_name.empty() ? load_config_file(tr_flags.config_path)
                                                   : preset(tr_flags.preset_name);
      apply_overrides(cfg, tr_flags);
      run_train_config(cfg, out);
      return kExitOk;
    }
    if (ga->parsed()) {
      return cmd_gates(ga_checkpoint, ga_contexts, ga_tau, ga_out, out);
    }
    if (re->parsed()) {
      return cmd_reproduce(re_name, re_flags, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace cstg::cli
