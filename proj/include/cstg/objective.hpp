#pragma once

#include <string>
#include <vector>

#include "cstg/autodiff.hpp"
#include "cstg/matrix.hpp"

namespace cstg::obj {

enum class LossKind { mse, bce };

std::string loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

// mse: mean squared error. bce: mean binary cross-entropy on probabilities,
// with yhat clamped to [1e-12, 1 - 1e-12]; targets must be 0/1.
ad::Tensor task_loss(LossKind kind, const ad::Tensor& yhat, const ad::Tensor& y);

// loss + lambda * mean(reg_per_row). The mean (rather than Algorithm-style
// sum over the batch) keeps lambda's scale independent of batch size.
ad::Tensor empirical_risk(const ad::Tensor& loss, const ad::Tensor& reg_per_row, double lambda);

struct LassoResult {
  std::vector<double> beta;
  double intercept = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

// l1-penalized linear (mse) or logistic (bce) fit by proximal gradient
// (ISTA) with soft-thresholding; the intercept is unpenalized. Stops when
// the relative objective change drops below 1e-8 or at the iteration cap.
// objective_trace, when given, receives the penalized objective after every
// iteration (nonincreasing by construction of the step size).
LassoResult lasso_fit(const Matrix& X, const std::vector<double>& y, double lambda1,
                      LossKind task, int max_iters = 10000,
                      std::vector<double>* objective_trace = nullptr);

}  // namespace cstg::obj
