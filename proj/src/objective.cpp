#include "cstg/objective.hpp"

#include <algorithm>
#include <cmath>

namespace cstg::obj {

namespace {
constexpr double kBceEps = 1e-12;
}

std::string loss_kind_name(LossKind k) { return k == LossKind::mse ? "mse" : "bce"; }

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "mse") return LossKind::mse;
  if (name == "bce") return LossKind::bce;
  throw ConfigError("unknown loss kind '" + name + "'");
}

ad::Tensor task_loss(LossKind kind, const ad::Tensor& yhat, const ad::Tensor& y) {
  if (yhat.numel() != y.numel()) {
    throw DimensionError("task_loss: prediction length " + std::to_string(yhat.numel()) +
                         " vs target length " + std::to_string(y.numel()));
  }
  const std::size_t n = y.numel();
  if (n == 0) throw DataError("task_loss: empty batch");
  if (kind == LossKind::mse) {
    ad::Tensor d = ad::sub(yhat, y);
    return ad::scale(ad::sum(ad::mul(d, d)), 1.0 / static_cast<double>(n));
  }
  for (double t : y.values()) {
    if (t != 0.0 && t != 1.0) {
      throw DataError("bce targets must be 0 or 1, got " + std::to_string(t));
    }
  }
  ad::Graph* g = yhat.graph();
  ad::Tensor ones = g->full(y.shape(), 1.0);
  ad::Tensor c = ad::clamp(yhat, kBceEps, 1.0 - kBceEps);
  ad::Tensor pos = ad::mul(y, ad::log(c));
  ad::Tensor neg = ad::mul(ad::sub(ones, y), ad::log(ad::sub(ones, c)));
  return ad::scale(ad::sum(ad::add(pos, neg)), -1.0 / static_cast<double>(n));
}

ad::Tensor empirical_risk(const ad::Tensor& loss, const ad::Tensor& reg_per_row, double lambda) {
  const double n = static_cast<double>(reg_per_row.numel());
  return ad::add(loss, ad::scale(ad::sum(reg_per_row), lambda / n));
}

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Smooth part of the lasso objective and its gradient over [beta; intercept].
double smooth_objective(const Matrix& X, const std::vector<double>& y,
                        const std::vector<double>& beta, double intercept, LossKind task,
                        std::vector<double>* grad_beta, double* grad_intercept) {
  const int n = X.rows, p = X.cols;
  if (grad_beta) std::fill(grad_beta->begin(), grad_beta->end(), 0.0);
  if (grad_intercept) *grad_intercept = 0.0;
  double obj = 0.0;
  for (int i = 0; i < n; ++i) {
    double eta = intercept;
    for (int j = 0; j < p; ++j) eta += X.at(i, j) * beta[j];
    double resid;
    if (task == LossKind::mse) {
      resid = eta - y[i];
      obj += resid * resid;
      resid *= 2.0;  // d/d eta of squared residual
    } else {
      const double pr = sigmoid(eta);
      const double cl = std::clamp(pr, kBceEps, 1.0 - kBceEps);
      obj += -(y[i] * std::log(cl) + (1.0 - y[i]) * std::log(1.0 - cl));
      resid = pr - y[i];
    }
    if (grad_beta) {
      for (int j = 0; j < p; ++j) (*grad_beta)[j] += resid * X.at(i, j);
      *grad_intercept += resid;
    }
  }
  const double inv_n = 1.0 / n;
  obj *= inv_n;
  if (grad_beta) {
    for (double& gj : *grad_beta) gj *= inv_n;
    *grad_intercept *= inv_n;
  }
  return obj;
}

// Largest eigenvalue of Xt~ Xt~ / n (with the intercept column appended),
// by power iteration. Used for the ISTA step size.
double gram_spectral_norm(const Matrix& X) {
  const int n = X.rows, p = X.cols + 1;
  std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p)));
  std::vector<double> xv(n), w(p);
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    for (int i = 0; i < n; ++i) {
      double acc = v[p - 1];  // intercept column of ones
      for (int j = 0; j < X.cols; ++j) acc += X.at(i, j) * v[j];
      xv[i] = acc;
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < X.cols; ++j) w[j] += X.at(i, j) * xv[i];
      w[p - 1] += xv[i];
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    const double new_lam = norm / static_cast<double>(n);
    for (int j = 0; j < p; ++j) v[j] = w[j] / norm;
    if (it > 10 && std::abs(new_lam - lam) <= 1e-12 * std::max(1.0, lam)) {
      lam = new_lam;
      break;
    }
    lam = new_lam;
  }
  return lam;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

LassoResult lasso_fit(const Matrix& X, const std::vector<double>& y, double lambda1,
                      LossKind task, int max_iters, std::vector<double>* objective_trace) {
  if (X.rows < 1 || X.cols < 1) throw DataError("lasso_fit: empty design matrix");
  if (static_cast<std::size_t>(X.rows) != y.size()) {
    throw DimensionError("lasso_fit: X has " + std::to_string(X.rows) + " rows but y has " +
                         std::to_string(y.size()));
  }
  if (lambda1 < 0.0) throw ConfigError("lasso_fit: lambda1 must be >= 0");
  for (double v : X.data) {
    if (!std::isfinite(v)) throw DataError("lasso_fit: non-finite entry in X");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("lasso_fit: non-finite entry in y");
  }
  if (task == LossKind::bce) {
    for (double t : y) {
      if (t != 0.0 && t != 1.0) throw DataError("lasso_fit: bce targets must be 0 or 1");
    }
  }

  const int p = X.cols;
  LassoResult res;
  res.beta.assign(p, 0.0);

  double lipschitz = gram_spectral_norm(X);
  lipschitz *= (task == LossKind::mse) ? 2.0 : 0.25;
  if (lipschitz <= 0.0) lipschitz = 1.0;
  const double step = 1.0 / lipschitz;

  std::vector<double> grad(p, 0.0);
  double grad_b = 0.0;
  double obj = smooth_objective(X, y, res.beta, res.intercept, task, nullptr, nullptr);
  for (const double b : res.beta) obj += lambda1 * std::abs(b);

  for (int it = 0; it < max_iters; ++it) {
    smooth_objective(X, y, res.beta, res.intercept, task, &grad, &grad_b);
    for (int j = 0; j < p; ++j) {
      res.beta[j] = soft_threshold(res.beta[j] - step * grad[j], step * lambda1);
    }
    res.intercept -= step * grad_b;
    double new_obj = smooth_objective(X, y, res.beta, res.intercept, task, nullptr, nullptr);
    for (const double b : res.beta) new_obj += lambda1 * std::abs(b);
    res.iterations = it + 1;
    if (objective_trace) objective_trace->push_back(new_obj);
    // Relative to the objective itself: perfect-fit problems (objective -> 0)
    // run to the iteration cap instead of stopping at a loose solution.
    const double rel = std::abs(obj - new_obj) / std::max(std::abs(obj), 1e-12);
    obj = new_obj;
    if (rel < 1e-8) break;
  }
  res.objective = obj;
  return res;
}

}  // namespace cstg::obj
