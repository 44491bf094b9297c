#include "cstg/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "cstg/report.hpp"
#include "cstg/rng.hpp"

namespace cstg::train {

std::string method_name(Method m) {
  switch (m) {
    case Method::plain: return "plain";
    case Method::global_stg: return "global_stg";
    case Method::cstg: return "cstg";
    case Method::weighted_cstg: return "weighted_cstg";
    case Method::lasso: return "lasso";
  }
  return "cstg";
}

Method method_from_name(const std::string& name) {
  if (name == "plain") return Method::plain;
  if (name == "global_stg") return Method::global_stg;
  if (name == "cstg") return Method::cstg;
  if (name == "weighted_cstg") return Method::weighted_cstg;
  if (name == "lasso") return Method::lasso;
  throw ConfigError("unknown method '" + name + "'");
}

std::string optimizer_name(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer optimizer_from_name(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must lie in [0, 1]");
  if (lasso_iters < 1) throw ConfigError("lasso_iters must be >= 1");
  if (method != Method::lasso && pred_arch.empty()) {
    throw ConfigError("pred_arch must not be empty");
  }
}

namespace {

bool uses_gates(Method m) {
  return m == Method::global_stg || m == Method::cstg || m == Method::weighted_cstg;
}

bool concat_context(const TrainConfig& cfg) {
  return cfg.with_context &&
         (cfg.method == Method::plain || cfg.method == Method::global_stg ||
          cfg.method == Method::lasso);
}

Matrix effective_x(const TrainConfig& cfg, const Matrix& x, const Matrix& z) {
  return concat_context(cfg) ? Matrix::hcat(x, z) : x;
}

ad::Tensor rows_tensor(ad::Graph& g, const Matrix& m, const std::vector<int>& idx) {
  std::vector<double> v;
  v.reserve(idx.size() * m.cols);
  for (int i : idx) {
    const auto* base = &m.data[static_cast<std::size_t>(i) * m.cols];
    v.insert(v.end(), base, base + m.cols);
  }
  return g.tensor({static_cast<int>(idx.size()), m.cols}, std::move(v), false);
}

ad::Tensor column_tensor(ad::Graph& g, const std::vector<double>& y, const std::vector<int>& idx) {
  std::vector<double> v;
  v.reserve(idx.size());
  for (int i : idx) v.push_back(y[i]);
  return g.tensor({static_cast<int>(idx.size()), 1}, std::move(v), false);
}

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long t = 0;
};

void apply_update(const TrainConfig& cfg, std::vector<ad::Tensor>& params, AdamState& adam) {
  if (cfg.optimizer == Optimizer::sgd) {
    for (ad::Tensor& p : params) {
      if (!p.has_grad()) continue;
      auto& val = p.values();
      const auto& grad = p.grad();
      for (std::size_t i = 0; i < val.size(); ++i) val[i] -= cfg.eta * grad[i];
    }
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (adam.m.empty()) {
    adam.m.resize(params.size());
    adam.v.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      adam.m[k].assign(params[k].numel(), 0.0);
      adam.v[k].assign(params[k].numel(), 0.0);
    }
  }
  ++adam.t;
  const double mc = 1.0 - std::pow(b1, static_cast<double>(adam.t));
  const double vc = 1.0 - std::pow(b2, static_cast<double>(adam.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Tensor& p = params[k];
    if (!p.has_grad()) continue;
    auto& val = p.values();
    const auto& grad = p.grad();
    for (std::size_t i = 0; i < val.size(); ++i) {
      adam.m[k][i] = b1 * adam.m[k][i] + (1.0 - b1) * grad[i];
      adam.v[k][i] = b2 * adam.v[k][i] + (1.0 - b2) * grad[i] * grad[i];
      const double mhat = adam.m[k][i] / mc;
      const double vhat = adam.v[k][i] / vc;
      val[i] -= cfg.eta * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::vector<std::vector<double>> snapshot(const std::vector<ad::Tensor>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const ad::Tensor& p : params) out.push_back(p.values());
  return out;
}

void restore(std::vector<ad::Tensor>& params, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].values() = snap[i];
}

// Eval-mode forward for arbitrary rows; assumes NoGrad is NOT required by the
// caller (wraps its own guard).
std::vector<double> eval_forward(const TrainResult& r, const Matrix& x_eff, const Matrix& z) {
  ad::Graph& g = *r.graph;
  ad::Graph::NoGrad guard(g);
  std::vector<int> all(x_eff.rows);
  std::iota(all.begin(), all.end(), 0);
  ad::Tensor xt = rows_tensor(g, x_eff, all);
  ad::Tensor input = xt;
  if (r.gate_model) {
    ad::Tensor zt = r.gate_model->kind == gates::GateKind::global_stg
                        ? xt  // batch size carrier only; contents unused
                        : rows_tensor(g, z, all);
    Rng unused(0);
    gates::GateOutput go = gates::gate_forward(*r.gate_model, zt, gates::Mode::eval, unused);
    input = gates::apply_gates(xt, go);
  }
  ad::Tensor out = r.predictor.forward(input);
  return out.values();
}

TrainResult lasso_train(const data::Dataset& ds_train, const TrainConfig& cfg) {
  TrainResult r;
  r.config = cfg;
  r.task = ds_train.task;
  r.graph = std::make_shared<ad::Graph>();
  Matrix x = effective_x(cfg, ds_train.x, ds_train.z);
  obj::LassoResult fit = obj::lasso_fit(x, ds_train.y, cfg.lambda, ds_train.task, cfg.lasso_iters);
  // Wrap the linear fit as a single-layer network so evaluation, export and
  // checkpointing share one path.
  std::vector<nn::Layer> layers(1);
  layers[0].weight = r.graph->tensor({1, x.cols}, fit.beta, true);
  layers[0].bias = r.graph->tensor({1}, {fit.intercept}, true);
  layers[0].activation =
      ds_train.task == obj::LossKind::bce ? nn::Activation::sigmoid : nn::Activation::none;
  r.predictor = nn::Mlp(x.cols, std::move(layers));
  r.final_train_risk = fit.objective;
  return r;
}

}  // namespace

std::vector<double> TrainResult::predict(const Matrix& x, const Matrix& z) const {
  return eval_forward(*this, effective_x(config, x, z), z);
}

double TrainResult::eval_loss(const data::Dataset& ds) const {
  std::vector<double> yhat = predict(ds.x, ds.z);
  ad::Graph g;
  ad::Graph::NoGrad guard(g);
  ad::Tensor yh = g.tensor({static_cast<int>(yhat.size())}, yhat, false);
  ad::Tensor yt = g.tensor({static_cast<int>(ds.y.size())}, ds.y, false);
  return obj::task_loss(task, yh, yt).scalar();
}

double TrainResult::eval_metric(const data::Dataset& ds) const {
  std::vector<double> yhat = predict(ds.x, ds.z);
  if (task == obj::LossKind::bce) return report::accuracy(yhat, ds.y);
  return report::r2_score(yhat, ds.y);
}

double TrainResult::mean_expected_open_gates(const data::Dataset& ds) const {
  if (!gate_model) return static_cast<double>(effective_x(config, ds.x, ds.z).cols);
  ad::Graph& g = *graph;
  ad::Graph::NoGrad guard(g);
  std::vector<int> all(ds.n());
  std::iota(all.begin(), all.end(), 0);
  ad::Tensor zt = gate_model->kind == gates::GateKind::global_stg
                      ? rows_tensor(g, effective_x(config, ds.x, ds.z), all)
                      : rows_tensor(g, ds.z, all);
  ad::Tensor eog = gates::expected_open_gates(*gate_model, zt);
  double mean = 0.0;
  for (double v : eog.values()) mean += v;
  return mean / static_cast<double>(eog.numel());
}

TrainResult train(const data::Dataset& ds_train, const data::Dataset& ds_val,
                  const TrainConfig& cfg) {
  cfg.validate();
  ds_train.validate();
  ds_val.validate();
  if (ds_train.task != ds_val.task) {
    throw ConfigError("train/val datasets disagree on task");
  }
  if (cfg.method == Method::lasso) {
    TrainResult r = lasso_train(ds_train, cfg);
    r.best_val_loss = r.eval_loss(ds_val);
    return r;
  }

  TrainResult r;
  r.config = cfg;
  r.task = ds_train.task;
  r.graph = std::make_shared<ad::Graph>();
  ad::Graph& g = *r.graph;

  const Matrix x_train = effective_x(cfg, ds_train.x, ds_train.z);
  const Matrix x_val = effective_x(cfg, ds_val.x, ds_val.z);
  const int gated_dim = x_train.cols;

  if (uses_gates(cfg.method)) {
    gates::GateKind kind = cfg.method == Method::global_stg ? gates::GateKind::global_stg
                           : cfg.method == Method::cstg     ? gates::GateKind::cstg
                                                            : gates::GateKind::weighted_cstg;
    gates::GateModel gm = gates::make_gate_model(g, kind, gated_dim, ds_train.context_dim(),
                                                 cfg.hyper_arch, cfg.sigma,
                                                 Rng::derive(cfg.seed, 0));
    gm.num_explanatory = ds_train.feature_dim();
    if (cfg.freeze_weight_head && gm.weight_head) {
      std::fill(gm.weight_head->W.values().begin(), gm.weight_head->W.values().end(), 0.0);
      std::fill(gm.weight_head->b.values().begin(), gm.weight_head->b.values().end(), 1.0);
    }
    r.gate_model = std::move(gm);
  }
  r.predictor = nn::build_mlp(g, gated_dim, cfg.pred_arch, Rng::derive(cfg.seed, 10));

  std::vector<ad::Tensor> params = r.predictor.parameters();
  if (r.gate_model) {
    for (ad::Tensor& p : r.gate_model->parameters()) {
      if (cfg.freeze_weight_head && r.gate_model->weight_head &&
          (p.node_id() == r.gate_model->weight_head->W.node_id() ||
           p.node_id() == r.gate_model->weight_head->b.node_id())) {
        continue;
      }
      params.push_back(p);
    }
  }

  Rng noise_rng(Rng::derive(cfg.seed, 11));
  Rng shuffle_rng(Rng::derive(cfg.seed, 12));
  AdamState adam;

  std::vector<int> order(ds_train.n());
  std::iota(order.begin(), order.end(), 0);

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_snapshot = snapshot(params);
  int stall = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double risk_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      ad::Tensor xt = rows_tensor(g, x_train, batch);
      ad::Tensor yt = column_tensor(g, ds_train.y, batch);
      ad::Tensor input = xt;
      ad::Tensor risk;
      if (r.gate_model) {
        ad::Tensor zt = r.gate_model->kind == gates::GateKind::global_stg
                            ? xt
                            : rows_tensor(g, ds_train.z, batch);
        gates::GateOutput go =
            gates::gate_forward(*r.gate_model, zt, gates::Mode::train, noise_rng);
        input = gates::apply_gates(xt, go);
        ad::Tensor yhat = r.predictor.forward(input);
        ad::Tensor loss = obj::task_loss(r.task, yhat, yt);
        ad::Tensor reg = gates::expected_open_gates_from_mu(go.mu, r.gate_model->sigma);
        risk = obj::empirical_risk(loss, reg, cfg.lambda);
      } else {
        ad::Tensor yhat = r.predictor.forward(input);
        risk = obj::task_loss(r.task, yhat, yt);
      }
      const double risk_value = risk.scalar();
      if (!std::isfinite(risk_value)) {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << " with risk " << risk_value;
        throw TrainingError(os.str());
      }
      risk_sum += risk_value * static_cast<double>(batch.size());
      g.backward(risk);
      apply_update(cfg, params, adam);
      for (ad::Tensor& p : params) p.zero_grad();
      g.clear_tape();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_risk = risk_sum / static_cast<double>(ds_train.n());
    {
      std::vector<double> yhat = eval_forward(r, x_val, ds_val.z);
      ad::Graph::NoGrad guard(g);
      ad::Tensor yh = g.tensor({static_cast<int>(yhat.size())}, yhat, false);
      ad::Tensor yv = g.tensor({static_cast<int>(ds_val.y.size())}, std::vector<double>(ds_val.y), false);
      stats.val_loss = obj::task_loss(r.task, yh, yv).scalar();
    }
    stats.expected_open_gates = r.mean_expected_open_gates(ds_val);
    stats.val_risk = stats.val_loss + (r.gate_model ? cfg.lambda * stats.expected_open_gates : 0.0);
    r.history.push_back(stats);

    if (stats.val_risk < best_val) {
      best_val = stats.val_risk;
      best_snapshot = snapshot(params);
      r.best_epoch = epoch;
      r.best_val_loss = stats.val_loss;
      stall = 0;
    } else {
      ++stall;
      if (stall >= cfg.patience) break;
    }
  }

  restore(params, best_snapshot);
  r.best_val_risk = best_val;
  r.final_train_risk = r.history.empty() ? 0.0 : r.history.back().train_risk;
  return r;
}

namespace {

// Runs `count` independent jobs, each building its own graph/model; results
// land in a caller-provided slot keyed by index, so merging is deterministic.
void run_jobs(int count, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  const int workers = std::min(jobs, count);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= count) break;
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

CvResult cross_validate(const data::Dataset& ds, const TrainConfig& cfg, int folds, int jobs) {
  if (folds < 2) throw ConfigError("cross_validate: folds must be >= 2");
  auto fold_idx = data::kfold_split(ds, folds, cfg.seed);
  CvResult out;
  out.per_fold.resize(folds);
  out.fold_results.resize(folds);
  run_jobs(folds, jobs, [&](int f) {
    std::vector<int> complement;
    for (int other = 0; other < folds; ++other) {
      if (other == f) continue;
      complement.insert(complement.end(), fold_idx[other].begin(), fold_idx[other].end());
    }
    std::sort(complement.begin(), complement.end());
    data::Dataset rest = ds.take_rows(complement);
    data::Dataset test = ds.take_rows(fold_idx[f]);
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = Rng::derive(cfg.seed, 2000 + static_cast<std::uint64_t>(f));
    auto tv = data::fraction_split(rest, {0.85, 0.15, 0.0}, fold_cfg.seed);
    TrainResult res;
    try {
      res = train(rest.take_rows(tv.train), rest.take_rows(tv.val), fold_cfg);
    } catch (const TrainingError& e) {
      throw TrainingError("fold " + std::to_string(f) + ": " + e.what());
    }
    out.per_fold[f] = res.eval_metric(test);
    out.fold_results[f] = std::move(res);
  });
  double mean = 0.0;
  for (double v : out.per_fold) mean += v;
  mean /= folds;
  double var = 0.0;
  for (double v : out.per_fold) var += (v - mean) * (v - mean);
  out.mean = mean;
  out.stddev = std::sqrt(var / folds);
  return out;
}

GridResult grid_search(const data::Dataset& ds, const TrainConfig& base_cfg,
                       const std::vector<double>& etas, const std::vector<double>& lambdas,
                       int jobs) {
  if (etas.empty() || lambdas.empty()) throw ConfigError("grid_search: empty grid");
  auto tv = data::fraction_split(ds, {0.7, 0.15, 0.15}, base_cfg.seed);
  data::Dataset dtrain = ds.take_rows(tv.train);
  data::Dataset dval = ds.take_rows(tv.val);

  GridResult out;
  const int count = static_cast<int>(etas.size() * lambdas.size());
  out.cells.resize(count);
  run_jobs(count, jobs, [&](int idx) {
    GridCell& cell = out.cells[idx];
    cell.eta = etas[idx / lambdas.size()];
    cell.lambda = lambdas[idx % lambdas.size()];
    TrainConfig cfg = base_cfg;
    cfg.eta = cell.eta;
    cfg.lambda = cell.lambda;
    cfg.seed = Rng::derive(base_cfg.seed, 1000 + static_cast<std::uint64_t>(idx));
    try {
      TrainResult res = train(dtrain, dval, cfg);
      cell.val_loss = res.best_val_loss;
      cell.expected_open_gates = res.mean_expected_open_gates(dval);
      cell.val_risk = cell.val_loss + cell.lambda * cell.expected_open_gates;
    } catch (const TrainingError&) {
      cell.diverged = true;
      cell.val_loss = std::numeric_limits<double>::infinity();
      cell.val_risk = std::numeric_limits<double>::infinity();
    }
  });

  int best = -1;
  for (int i = 0; i < count; ++i) {
    const GridCell& c = out.cells[i];
    if (c.diverged) continue;
    if (best < 0) {
      best = i;
      continue;
    }
    const GridCell& b = out.cells[best];
    const double tol = 1e-12 * std::max(1.0, std::abs(b.val_loss));
    if (c.val_loss < b.val_loss - tol) {
      best = i;
    } else if (std::abs(c.val_loss - b.val_loss) <= tol && c.lambda > b.lambda) {
      best = i;  // tie toward the sparser model
    }
  }
  if (best < 0) {
    std::ostringstream os;
    os << "grid_search: every cell diverged;";
    for (const GridCell& c : out.cells) {
      os << " (eta=" << c.eta << ", lambda=" << c.lambda << ")";
    }
    throw TrainingError(os.str());
  }
  out.best_index = best;
  out.best_config = base_cfg;
  out.best_config.eta = out.cells[best].eta;
  out.best_config.lambda = out.cells[best].lambda;
  return out;
}

}  // namespace cstg::train
