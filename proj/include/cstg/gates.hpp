#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cstg/autodiff.hpp"
#include "cstg/networks.hpp"
#include "cstg/rng.hpp"

namespace cstg::gates {

enum class GateKind { global_stg, cstg, weighted_cstg };

std::string gate_kind_name(GateKind k);
GateKind gate_kind_from_name(const std::string& name);

struct WeightHead {
  ad::Tensor W;  // [D x H], H = hypernetwork penultimate width
  ad::Tensor b;  // [D]
};

// Gate parameterization. Exactly one of {hyper, global_mu} is present,
// matching kind; sigma is fixed for the lifetime of training.
struct GateModel {
  GateKind kind = GateKind::cstg;
  double sigma = 0.5;
  std::optional<nn::Mlp> hyper;     // cstg / weighted_cstg
  ad::Tensor global_mu;             // global_stg only, [D]
  std::optional<WeightHead> weight_head;  // weighted_cstg only
  int num_features = 0;             // D: width of the gate vector
  int num_explanatory = 0;          // <= D; the prefix counted in selection summaries

  std::vector<ad::Tensor> parameters() const;
  ad::Graph* graph() const;
  int context_dim() const { return hyper ? hyper->in_dim() : 0; }
};

struct GateOutput {
  ad::Tensor mu;      // [batch x D]
  ad::Tensor gate;    // [batch x D], entries in [0, 1]
  ad::Tensor weight;  // [batch x D] when kind == weighted_cstg, else empty
};

enum class Mode { train, eval };

// Builds a gate model on `g`. For cstg/weighted_cstg, `hyper_arch` follows
// the published architecture; a final linear+sigmoid projection to
// `feature_dim` gates is appended whenever the last layer width differs.
// The global variant parameterizes mu directly, initialized to 0.5.
GateModel make_gate_model(ad::Graph& g, GateKind kind, int feature_dim, int context_dim,
                          const std::vector<nn::LayerSpec>& hyper_arch, double sigma,
                          std::uint64_t seed);

// Train mode perturbs mu with eps ~ N(0, sigma^2 I) per element and clamps
// to [0, 1]; eval mode clamps mu directly and consumes no randomness.
GateOutput gate_forward(const GateModel& gm, const ad::Tensor& z, Mode mode, Rng& rng);

// x .* gate, further .* weight when present.
ad::Tensor apply_gates(const ad::Tensor& x, const GateOutput& go);

// Per-row sum_d Phi(mu_d / sigma): the differentiable expected number of
// open gates (the L0 surrogate).
ad::Tensor expected_open_gates(const GateModel& gm, const ad::Tensor& z);
ad::Tensor expected_open_gates_from_mu(const ad::Tensor& mu, double sigma);

struct Selection {
  std::vector<int> indices;  // explanatory features with gate > tau
  std::vector<double> gate;  // full eval-mode gate vector
};

// Eval-mode selection for a single context row; strict inequality gate > tau.
Selection select_features(const GateModel& gm, const std::vector<double>& z, double tau = 0.5);

nlohmann::ordered_json gate_model_to_json(const GateModel& gm);
GateModel gate_model_from_json(ad::Graph& g, const nlohmann::json& j);

}  // namespace cstg::gates
