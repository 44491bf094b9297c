#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cstg/dataset.hpp"
#include "cstg/gates.hpp"
#include "cstg/networks.hpp"
#include "cstg/objective.hpp"

namespace cstg::train {

enum class Method { plain, global_stg, cstg, weighted_cstg, lasso };
enum class Optimizer { sgd, adam };

std::string method_name(Method m);
Method method_from_name(const std::string& name);
std::string optimizer_name(Optimizer o);
Optimizer optimizer_from_name(const std::string& name);

struct TrainConfig {
  Method method = Method::cstg;
  bool with_context = false;  // concatenate z onto x for non-contextual methods
  double eta = 1e-2;
  double lambda = 1e-1;
  double sigma = 0.5;
  int batch_size = 64;
  int max_epochs = 2000;
  int patience = 50;
  std::uint64_t seed = 0;
  std::vector<nn::LayerSpec> hyper_arch;
  std::vector<nn::LayerSpec> pred_arch;  // includes the output layer
  double tau = 0.5;
  Optimizer optimizer = Optimizer::sgd;
  bool freeze_weight_head = false;  // pins w(z) = 1 (testing hook)
  int lasso_iters = 10000;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_risk = 0.0;
  double val_loss = 0.0;
  double expected_open_gates = 0.0;  // mean over the validation contexts
  double val_risk = 0.0;             // val_loss + lambda * expected_open_gates
};

struct TrainResult {
  TrainConfig config;
  obj::LossKind task = obj::LossKind::mse;
  std::shared_ptr<ad::Graph> graph;  // owns every model parameter below
  std::optional<gates::GateModel> gate_model;
  nn::Mlp predictor;
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_loss = 0.0;  // validation task loss at the best epoch
  double best_val_risk = 0.0;
  double final_train_risk = 0.0;

  // Eval-mode predictions (probabilities for bce).
  std::vector<double> predict(const Matrix& x, const Matrix& z) const;
  // Task loss of eval-mode predictions.
  double eval_loss(const data::Dataset& ds) const;
  // Accuracy % (bce) or R^2 (mse) on a dataset.
  double eval_metric(const data::Dataset& ds) const;
  // Mean expected open gates over the dataset's contexts (D for gateless methods).
  double mean_expected_open_gates(const data::Dataset& ds) const;
};

// Algorithm: per epoch, for each shuffled minibatch, sample gates in train
// mode, mask (and weight) the features, take the task loss plus
// lambda * mean regularizer, backpropagate, and step theta and phi.
// Convergence: no improvement of the validation risk (task loss plus the
// lambda-weighted expected open gates) for `patience` epochs; the
// best-validation-risk parameters are restored. Tracking the full risk
// rather than the bare loss lets gate sparsification count as progress,
// which the loss plateau would otherwise cut short. Deterministic under
// cfg.seed.
TrainResult train(const data::Dataset& ds_train, const data::Dataset& ds_val,
                  const TrainConfig& cfg);

struct CvResult {
  std::vector<double> per_fold;  // task metric per fold
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<TrainResult> fold_results;
};

// Trains on each fold's complement (with an inner 85/15 train/val carve for
// early stopping) and evaluates the task metric on the fold.
CvResult cross_validate(const data::Dataset& ds, const TrainConfig& cfg, int folds,
                        int jobs = 1);

struct GridCell {
  double eta = 0.0;
  double lambda = 0.0;
  bool diverged = false;
  double val_loss = 0.0;            // best-epoch validation task loss
  double expected_open_gates = 0.0; // on the validation split, eval mode
  double val_risk = 0.0;            // val_loss + lambda * expected_open_gates
};

struct GridResult {
  std::vector<GridCell> cells;  // row-major over etas x lambdas
  int best_index = -1;
  TrainConfig best_config;
};

// Trains every (eta, lambda) pair on a 70/15/15 split of `ds`, selecting the
// best validation loss; ties break toward larger lambda.
GridResult grid_search(const data::Dataset& ds, const TrainConfig& base_cfg,
                       const std::vector<double>& etas, const std::vector<double>& lambdas,
                       int jobs = 1);

}  // namespace cstg::train
