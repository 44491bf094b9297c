#include "cstg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "cstg/training.hpp"

namespace cstg::report {

double accuracy(const std::vector<double>& yhat_prob, const std::vector<double>& y) {
  if (yhat_prob.empty() || yhat_prob.size() != y.size()) {
    throw DataError("accuracy: empty or mismatched inputs");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (std::round(yhat_prob[i]) == y[i]) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(y.size());
}

double r2_score(const std::vector<double>& yhat, const std::vector<double>& y) {
  if (y.size() < 2 || yhat.size() != y.size()) {
    throw MetricError("r2_score: needs at least 2 aligned observations");
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw MetricError("r2_score: target variance is zero");
  return 1.0 - ss_res / ss_tot;
}

GateSummary gate_summary(const gates::GateModel& gm, const Matrix& contexts, double tau) {
  if (contexts.rows < 1) throw DataError("gate_summary: no contexts supplied");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("gate_summary: tau must lie in [0, 1]");
  GateSummary out;
  out.tau = tau;
  std::set<int> unioned;
  ad::Graph* g = gm.graph();
  ad::Graph::NoGrad guard(*g);
  Rng unused(0);
  for (int i = 0; i < contexts.rows; ++i) {
    ContextGates cg;
    cg.z = contexts.row(i);
    ad::Tensor zt = g->tensor({1, std::max(1, contexts.cols)},
                              contexts.cols ? cg.z : std::vector<double>{0.0}, false);
    gates::GateOutput go = gates::gate_forward(gm, zt, gates::Mode::eval, unused);
    cg.mu = go.mu.values();
    cg.gate = go.gate.values();
    if (go.weight) cg.weight = go.weight.values();
    for (int d = 0; d < gm.num_explanatory; ++d) {
      if (cg.gate[d] > tau) {
        cg.selected.push_back(d);
        unioned.insert(d);
      }
    }
    out.mean_count += static_cast<double>(cg.selected.size());
    out.contexts.push_back(std::move(cg));
  }
  out.mean_count /= static_cast<double>(contexts.rows);
  out.union_set.assign(unioned.begin(), unioned.end());
  out.union_count = static_cast<int>(out.union_set.size());
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_gates_csv(const GateSummary& summary, std::ostream& out) {
  const std::size_t zdim = summary.contexts.empty() ? 0 : summary.contexts.front().z.size();
  out << "context_id";
  for (std::size_t j = 0; j < zdim; ++j) out << ",z_" << j;
  out << ",feature,mu,gate,weight,selected\n";
  for (std::size_t i = 0; i < summary.contexts.size(); ++i) {
    const ContextGates& cg = summary.contexts[i];
    std::set<int> sel(cg.selected.begin(), cg.selected.end());
    for (std::size_t d = 0; d < cg.gate.size(); ++d) {
      out << i;
      for (std::size_t j = 0; j < zdim; ++j) out << ',' << fmt(cg.z[j]);
      out << ',' << d << ',' << fmt(cg.mu[d]) << ',' << fmt(cg.gate[d]) << ',';
      if (!cg.weight.empty()) out << fmt(cg.weight[d]);
      out << ',' << (sel.count(static_cast<int>(d)) ? 1 : 0) << '\n';
    }
  }
}

std::vector<GateCsvRow> parse_gates_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("gates.csv: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::size_t zdim = 0;
  for (const auto& h : header) {
    if (h.rfind("z_", 0) == 0) ++zdim;
  }
  std::vector<GateCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (cells.size() != header.size()) {
      throw FormatError("gates.csv: row width " + std::to_string(cells.size()) +
                        " does not match header " + std::to_string(header.size()));
    }
    GateCsvRow row;
    std::size_t c = 0;
    row.context_id = std::stoi(cells[c++]);
    for (std::size_t j = 0; j < zdim; ++j) row.z.push_back(std::stod(cells[c++]));
    row.feature = std::stoi(cells[c++]);
    row.mu = std::stod(cells[c++]);
    row.gate = std::stod(cells[c++]);
    if (!cells[c].empty()) row.weight = std::stod(cells[c]);
    ++c;
    row.selected = cells[c] == "1";
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_plot_csv(const GateSummary& summary, std::ostream& out) {
  const std::size_t zdim = summary.contexts.empty() ? 0 : summary.contexts.front().z.size();
  for (std::size_t j = 0; j < zdim; ++j) out << "z_" << j << ',';
  out << "feature,value\n";
  for (const ContextGates& cg : summary.contexts) {
    for (std::size_t d = 0; d < cg.gate.size(); ++d) {
      for (std::size_t j = 0; j < zdim; ++j) out << fmt(cg.z[j]) << ',';
      out << d << ',' << fmt(cg.gate[d]) << '\n';
    }
  }
}

Theorem34Report theorem34_experiment(std::uint64_t seed) {
  // Linear-regression construction: two equiprobable one-hot contexts with
  // disjoint supports {0,1} / {2,3}; features 4, 5 never enter the target.
  const int n = 4000, d = 6;
  Rng rng(Rng::derive(seed, 77));
  data::Dataset ds;
  ds.task = obj::LossKind::mse;
  ds.x = Matrix(n, d);
  ds.z = Matrix(n, 2);
  ds.y.resize(n);
  ds.context_id.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.x.at(i, j) = rng.normal();
    const int zi = static_cast<int>(rng.below(2));
    ds.context_id[i] = zi;
    ds.z.at(i, zi) = 1.0;
    ds.y[i] = zi == 0 ? ds.x.at(i, 0) + ds.x.at(i, 1) : ds.x.at(i, 2) + ds.x.at(i, 3);
  }

  train::TrainConfig cfg;
  cfg.eta = 5e-2;
  cfg.lambda = 0.02;
  cfg.sigma = 0.5;
  cfg.batch_size = 64;
  cfg.max_epochs = 400;
  cfg.patience = 40;
  cfg.seed = seed;
  cfg.pred_arch = {{1, nn::Activation::none}};
  cfg.hyper_arch = {{d, nn::Activation::sigmoid}};

  auto tv = data::fraction_split(ds, {0.7, 0.15, 0.15}, seed);
  data::Dataset dtrain = ds.take_rows(tv.train);
  data::Dataset dval = ds.take_rows(tv.val);

  cfg.method = train::Method::global_stg;
  train::TrainResult stg = train::train(dtrain, dval, cfg);

  cfg.method = train::Method::cstg;
  train::TrainResult cstg = train::train(dtrain, dval, cfg);

  Theorem34Report rep;
  rep.mu_stg = stg.gate_model->global_mu.values();

  Matrix contexts(2, 2);
  contexts.at(0, 0) = 1.0;
  contexts.at(1, 1) = 1.0;
  GateSummary summary = gate_summary(*cstg.gate_model, contexts, 0.5);
  rep.mean_mu_cstg.assign(d, 0.0);
  for (const ContextGates& cg : summary.contexts) {
    for (int j = 0; j < d; ++j) rep.mean_mu_cstg[j] += cg.mu[j] / 2.0;
  }
  for (int j = 0; j < d; ++j) {
    rep.max_abs_gap = std::max(rep.max_abs_gap, std::abs(rep.mu_stg[j] - rep.mean_mu_cstg[j]));
  }
  return rep;
}

nlohmann::ordered_json metrics_json(const std::string& metric_name, double value, double std_dev,
                                    const std::vector<double>& per_fold) {
  nlohmann::ordered_json j;
  j["metric_name"] = metric_name;
  j["value"] = value;
  j["std"] = std_dev;
  j["per_fold"] = per_fold;
  return j;
}

}  // namespace cstg::report
