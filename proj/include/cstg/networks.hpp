#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cstg/autodiff.hpp"

namespace cstg::nn {

enum class Activation { relu, sigmoid, none };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerSpec {
  int out_dim = 0;
  Activation activation = Activation::none;
};

struct Layer {
  ad::Tensor weight;  // [out x in]
  ad::Tensor bias;    // [out]
  Activation activation = Activation::none;
};

// Batched feed-forward network. Parameters live on the graph used at
// construction time; forward passes record onto that graph.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in_dim, std::vector<Layer> layers) : in_dim_(in_dim), layers_(std::move(layers)) {}

  int in_dim() const { return in_dim_; }
  int out_dim() const { return layers_.back().weight.dim(0); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::vector<ad::Tensor> parameters() const;

  // input: [batch x in_dim] -> [batch x out_dim].
  ad::Tensor forward(const ad::Tensor& input) const;

  // Also exposes the activated input to the final layer (the penultimate
  // activation; equals `input` for a single-layer network).
  ad::Tensor forward(const ad::Tensor& input, ad::Tensor* penultimate) const;

  // Width of the final layer's input.
  int penultimate_dim() const { return layers_.back().weight.dim(1); }

 private:
  int in_dim_ = 0;
  std::vector<Layer> layers_;
};

// Xavier/Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases;
// deterministic for a fixed seed.
Mlp build_mlp(ad::Graph& g, int in_dim, const std::vector<LayerSpec>& specs, std::uint64_t seed);

// Checkpoint schema: {in_dim, layers: [{rows, cols, activation,
// weights: row-major array, bias: array}]}.
nlohmann::ordered_json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(ad::Graph& g, const nlohmann::json& j);

}  // namespace cstg::nn
