#include "cstg/networks.hpp"

#include <cmath>

#include "cstg/rng.hpp"

namespace cstg::nn {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::none: return "none";
  }
  return "none";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "none") return Activation::none;
  throw ConfigError("unknown activation '" + name + "'");
}

std::vector<ad::Tensor> Mlp::parameters() const {
  std::vector<ad::Tensor> out;
  out.reserve(layers_.size() * 2);
  for (const Layer& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

namespace {

ad::Tensor apply_activation(const ad::Tensor& h, Activation a) {
  switch (a) {
    case Activation::relu: return ad::relu(h);
    case Activation::sigmoid: return ad::sigmoid(h);
    case Activation::none: return h;
  }
  return h;
}

}  // namespace

ad::Tensor Mlp::forward(const ad::Tensor& input) const {
  return forward(input, nullptr);
}

ad::Tensor Mlp::forward(const ad::Tensor& input, ad::Tensor* penultimate) const {
  if (input.shape().size() != 2 || input.dim(1) != in_dim_) {
    throw DimensionError("mlp forward: input " + ad::shape_str(input.shape()) +
                         " does not match in_dim " + std::to_string(in_dim_));
  }
  ad::Tensor h = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (penultimate && i + 1 == layers_.size()) *penultimate = h;
    const Layer& l = layers_[i];
    h = ad::add_bias(ad::matmul(h, ad::transpose(l.weight)), l.bias);
    h = apply_activation(h, l.activation);
  }
  return h;
}

Mlp build_mlp(ad::Graph& g, int in_dim, const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  if (in_dim < 1) throw ConfigError("build_mlp: in_dim must be >= 1");
  if (specs.empty()) throw ConfigError("build_mlp: layer spec list is empty");
  Rng rng(seed);
  std::vector<Layer> layers;
  layers.reserve(specs.size());
  int fan_in = in_dim;
  for (const LayerSpec& spec : specs) {
    if (spec.out_dim < 1) throw ConfigError("build_mlp: layer out_dim must be >= 1");
    const int fan_out = spec.out_dim;
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
    for (double& v : w) v = rng.uniform(-bound, bound);
    Layer layer;
    layer.weight = g.tensor({fan_out, fan_in}, std::move(w), true);
    layer.bias = g.zeros({fan_out}, true);
    layer.activation = spec.activation;
    layers.push_back(layer);
    fan_in = fan_out;
  }
  return Mlp(in_dim, std::move(layers));
}

nlohmann::ordered_json mlp_to_json(const Mlp& net) {
  nlohmann::ordered_json j;
  j["in_dim"] = net.in_dim();
  j["layers"] = nlohmann::ordered_json::array();
  for (const Layer& l : net.layers()) {
    nlohmann::ordered_json lj;
    lj["rows"] = l.weight.dim(0);
    lj["cols"] = l.weight.dim(1);
    lj["activation"] = activation_name(l.activation);
    lj["weights"] = l.weight.values();
    lj["bias"] = l.bias.values();
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

Mlp mlp_from_json(ad::Graph& g, const nlohmann::json& j) {
  if (!j.contains("in_dim") || !j.contains("layers")) {
    throw FormatError("mlp checkpoint: missing in_dim or layers");
  }
  const int in_dim = j.at("in_dim").get<int>();
  std::vector<Layer> layers;
  int expect_in = in_dim;
  for (const auto& lj : j.at("layers")) {
    const int rows = lj.at("rows").get<int>();
    const int cols = lj.at("cols").get<int>();
    if (cols != expect_in) {
      throw FormatError("mlp checkpoint: layer expects " + std::to_string(cols) +
                        " inputs but previous width is " + std::to_string(expect_in));
    }
    auto w = lj.at("weights").get<std::vector<double>>();
    auto b = lj.at("bias").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(rows) * cols || b.size() != static_cast<std::size_t>(rows)) {
      throw FormatError("mlp checkpoint: weight/bias sizes do not match rows x cols");
    }
    Layer layer;
    layer.weight = g.tensor({rows, cols}, std::move(w), true);
    layer.bias = g.tensor({rows}, std::move(b), true);
    layer.activation = activation_from_name(lj.at("activation").get<std::string>());
    layers.push_back(layer);
    expect_in = rows;
  }
  if (layers.empty()) throw FormatError("mlp checkpoint: no layers");
  return Mlp(in_dim, std::move(layers));
}

}  // namespace cstg::nn
