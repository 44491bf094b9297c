#include "cstg/gates.hpp"

#include <cmath>

namespace cstg::gates {

std::string gate_kind_name(GateKind k) {
  switch (k) {
    case GateKind::global_stg: return "global_stg";
    case GateKind::cstg: return "cstg";
    case GateKind::weighted_cstg: return "weighted_cstg";
  }
  return "cstg";
}

GateKind gate_kind_from_name(const std::string& name) {
  if (name == "global_stg") return GateKind::global_stg;
  if (name == "cstg") return GateKind::cstg;
  if (name == "weighted_cstg") return GateKind::weighted_cstg;
  throw ConfigError("unknown gate kind '" + name + "'");
}

std::vector<ad::Tensor> GateModel::parameters() const {
  std::vector<ad::Tensor> out;
  if (hyper) out = hyper->parameters();
  if (global_mu) out.push_back(global_mu);
  if (weight_head) {
    out.push_back(weight_head->W);
    out.push_back(weight_head->b);
  }
  return out;
}

ad::Graph* GateModel::graph() const {
  if (global_mu) return global_mu.graph();
  if (hyper) return hyper->layers().front().weight.graph();
  return nullptr;
}

GateModel make_gate_model(ad::Graph& g, GateKind kind, int feature_dim, int context_dim,
                          const std::vector<nn::LayerSpec>& hyper_arch, double sigma,
                          std::uint64_t seed) {
  if (feature_dim < 1) throw ConfigError("gate model: feature_dim must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("gate model: sigma must be > 0");
  GateModel gm;
  gm.kind = kind;
  gm.sigma = sigma;
  gm.num_features = feature_dim;
  gm.num_explanatory = feature_dim;
  if (kind == GateKind::global_stg) {
    gm.global_mu = g.full({feature_dim}, 0.5, true);
    return gm;
  }
  if (context_dim < 1) throw ConfigError("gate model: context_dim must be >= 1");
  std::vector<nn::LayerSpec> arch = hyper_arch;
  if (arch.empty()) arch.push_back({feature_dim, nn::Activation::sigmoid});
  if (arch.back().out_dim != feature_dim) {
    arch.push_back({feature_dim, nn::Activation::sigmoid});
  }
  gm.hyper = nn::build_mlp(g, context_dim, arch, Rng::derive(seed, 0));
  if (kind == GateKind::weighted_cstg) {
    const int h = gm.hyper->penultimate_dim();
    Rng rng(Rng::derive(seed, 1));
    const double bound = std::sqrt(6.0 / (h + feature_dim));
    std::vector<double> w(static_cast<std::size_t>(feature_dim) * h);
    for (double& v : w) v = rng.uniform(-bound, bound);
    WeightHead head;
    head.W = g.tensor({feature_dim, h}, std::move(w), true);
    head.b = g.zeros({feature_dim}, true);
    gm.weight_head = head;
  }
  return gm;
}

namespace {

// mu for a batch of contexts, plus the penultimate activation when the
// caller needs the weight head input.
ad::Tensor gate_mu(const GateModel& gm, const ad::Tensor& z, ad::Tensor* penultimate) {
  if (gm.kind == GateKind::global_stg) {
    const int batch = z ? z.dim(0) : 1;
    return ad::repeat_rows(gm.global_mu, batch);
  }
  if (!z || z.shape().size() != 2 || z.dim(1) != gm.hyper->in_dim()) {
    throw DimensionError("gate_forward: context width " +
                         (z ? ad::shape_str(z.shape()) : std::string("<none>")) +
                         " does not match hypernetwork in_dim " +
                         std::to_string(gm.hyper->in_dim()));
  }
  return gm.hyper->forward(z, penultimate);
}

}  // namespace

GateOutput gate_forward(const GateModel& gm, const ad::Tensor& z, Mode mode, Rng& rng) {
  GateOutput out;
  ad::Tensor penultimate;
  out.mu = gate_mu(gm, z, &penultimate);
  ad::Graph* g = out.mu.graph();
  if (mode == Mode::train) {
    std::vector<double> eps(out.mu.numel());
    for (double& e : eps) e = rng.normal(0.0, gm.sigma);
    ad::Tensor noise = g->tensor(out.mu.shape(), std::move(eps), false);
    out.gate = ad::clamp01(ad::add(out.mu, noise));
  } else {
    out.gate = ad::clamp01(out.mu);
  }
  if (gm.kind == GateKind::weighted_cstg) {
    // penultimate is the hypernetwork input itself when there is no hidden
    // layer, so h_L(z) = z in that case.
    out.weight = ad::add_bias(ad::matmul(penultimate, ad::transpose(gm.weight_head->W)),
                              gm.weight_head->b);
  }
  return out;
}

ad::Tensor apply_gates(const ad::Tensor& x, const GateOutput& go) {
  ad::Tensor gated = ad::mul(x, go.gate);
  if (go.weight) gated = ad::mul(gated, go.weight);
  return gated;
}

ad::Tensor expected_open_gates_from_mu(const ad::Tensor& mu, double sigma) {
  return ad::row_sum(ad::normal_cdf(ad::scale(mu, 1.0 / sigma)));
}

ad::Tensor expected_open_gates(const GateModel& gm, const ad::Tensor& z) {
  ad::Tensor mu = gate_mu(gm, z, nullptr);
  return expected_open_gates_from_mu(mu, gm.sigma);
}

Selection select_features(const GateModel& gm, const std::vector<double>& z, double tau) {
  if (tau < 0.0 || tau > 1.0) {
    throw ConfigError("selection threshold tau must lie in [0, 1], got " + std::to_string(tau));
  }
  ad::Graph* g = gm.graph();
  ad::Graph::NoGrad guard(*g);
  ad::Tensor zt;
  if (gm.kind != GateKind::global_stg) {
    zt = g->tensor({1, static_cast<int>(z.size())}, z, false);
  } else {
    zt = g->tensor({1, std::max<int>(1, static_cast<int>(z.size()))},
                   std::vector<double>(std::max<std::size_t>(1, z.size()), 0.0), false);
  }
  Rng unused(0);
  GateOutput go = gate_forward(gm, zt, Mode::eval, unused);
  Selection sel;
  sel.gate = go.gate.values();
  for (int d = 0; d < gm.num_explanatory; ++d) {
    if (sel.gate[d] > tau) sel.indices.push_back(d);
  }
  return sel;
}

nlohmann::ordered_json gate_model_to_json(const GateModel& gm) {
  nlohmann::ordered_json j;
  j["kind"] = gate_kind_name(gm.kind);
  j["sigma"] = gm.sigma;
  j["num_features"] = gm.num_features;
  j["num_explanatory"] = gm.num_explanatory;
  if (gm.hyper) j["hyper"] = nn::mlp_to_json(*gm.hyper);
  if (gm.global_mu) j["global_mu"] = gm.global_mu.values();
  if (gm.weight_head) {
    nlohmann::ordered_json h;
    h["rows"] = gm.weight_head->W.dim(0);
    h["cols"] = gm.weight_head->W.dim(1);
    h["W"] = gm.weight_head->W.values();
    h["b"] = gm.weight_head->b.values();
    j["weight_head"] = std::move(h);
  }
  return j;
}

GateModel gate_model_from_json(ad::Graph& g, const nlohmann::json& j) {
  GateModel gm;
  gm.kind = gate_kind_from_name(j.at("kind").get<std::string>());
  gm.sigma = j.at("sigma").get<double>();
  gm.num_features = j.at("num_features").get<int>();
  gm.num_explanatory = j.at("num_explanatory").get<int>();
  if (j.contains("hyper")) gm.hyper = nn::mlp_from_json(g, j.at("hyper"));
  if (j.contains("global_mu")) {
    auto mu = j.at("global_mu").get<std::vector<double>>();
    gm.global_mu = g.tensor({static_cast<int>(mu.size())}, std::move(mu), true);
  }
  if (j.contains("weight_head")) {
    const auto& h = j.at("weight_head");
    const int rows = h.at("rows").get<int>();
    const int cols = h.at("cols").get<int>();
    auto w = h.at("W").get<std::vector<double>>();
    auto b = h.at("b").get<std::vector<double>>();
    if (w.size() != static_cast<std::size_t>(rows) * cols || b.size() != static_cast<std::size_t>(rows)) {
      throw FormatError("gate model checkpoint: weight head sizes do not match");
    }
    WeightHead head;
    head.W = g.tensor({rows, cols}, std::move(w), true);
    head.b = g.tensor({rows}, std::move(b), true);
    gm.weight_head = head;
  }
  const bool has_hyper = gm.hyper.has_value();
  const bool has_mu = static_cast<bool>(gm.global_mu);
  if (has_hyper == has_mu) {
    throw FormatError("gate model checkpoint: exactly one of hyper/global_mu required");
  }
  return gm;
}

}  // namespace cstg::gates
