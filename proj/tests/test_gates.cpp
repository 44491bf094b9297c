#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cstg/gates.hpp"
#include "fd_utils.hpp"

using namespace cstg;

namespace {

gates::GateModel global_model(ad::Graph& g, std::vector<double> mu) {
  gates::GateModel gm = gates::make_gate_model(g, gates::GateKind::global_stg,
                                               static_cast<int>(mu.size()), 0, {}, 0.5, 1);
  gm.global_mu.values() = std::move(mu);
  return gm;
}

}  // namespace

TEST_CASE("eval-mode gates clamp mu into [0,1]") {
  ad::Graph g;
  Rng rng(0);
  SUBCASE("interior values pass through unchanged") {
    gates::GateModel gm = global_model(g, {0.5, 0.9});
    ad::Tensor z = g.tensor({1, 1}, {0.0});
    auto go = gates::gate_forward(gm, z, gates::Mode::eval, rng);
    CHECK(go.gate.values() == std::vector<double>{0.5, 0.9});
  }
  SUBCASE("negative mu clamps to zero") {
    gates::GateModel gm = global_model(g, {-0.2, 0.3});
    ad::Tensor z = g.tensor({1, 1}, {0.0});
    auto go = gates::gate_forward(gm, z, gates::Mode::eval, rng);
    CHECK(go.gate.values() == std::vector<double>{0.0, 0.3});
  }
}

TEST_CASE("train-mode gate equals clamp01(mu + eps) with the documented noise order") {
  ad::Graph g;
  gates::GateModel gm = global_model(g, {0.5, 0.1, 0.8});
  gm.sigma = 0.5;
  ad::Tensor z = g.tensor({2, 1}, {0.0, 0.0});
  Rng rng(99);
  auto go = gates::gate_forward(gm, z, gates::Mode::train, rng);
  Rng replay(99);
  for (int i = 0; i < 2; ++i) {
    for (int d = 0; d < 3; ++d) {
      const double eps = replay.normal(0.0, 0.5);
      const double expect = std::clamp(gm.global_mu.values()[d] + eps, 0.0, 1.0);
      CHECK(go.gate.at(i, d) == doctest::Approx(expect).epsilon(1e-15));
      CHECK(go.gate.at(i, d) >= 0.0);
      CHECK(go.gate.at(i, d) <= 1.0);
    }
  }
  // clamp at the upper edge: mu 0.5 with noise 0.7 saturates at 1
  ad::Graph g2;
  ad::Tensor mu = g2.tensor({1}, {0.5});
  ad::Tensor eps = g2.tensor({1}, {0.7});
  CHECK(ad::clamp01(ad::add(mu, eps)).values()[0] == 1.0);
}

TEST_CASE("eval mode is deterministic and consumes no randomness") {
  ad::Graph g;
  gates::GateModel gm =
      gates::make_gate_model(g, gates::GateKind::cstg, 6, 3,
                             {{8, nn::Activation::relu}, {6, nn::Activation::sigmoid}}, 0.5, 5);
  ad::Tensor z = g.tensor({2, 3}, {1, 0, 0, 0, 1, 0});
  Rng probe(1);
  const std::uint64_t first_draw = probe.next_u64();
  Rng rng_a(1), rng_b(1);
  auto a = gates::gate_forward(gm, z, gates::Mode::eval, rng_a);
  auto b = gates::gate_forward(gm, z, gates::Mode::eval, rng_b);
  CHECK(a.gate.values() == b.gate.values());
  CHECK(rng_a.next_u64() == first_draw);  // stream untouched
}

TEST_CASE("gate entries stay in [0,1] in both modes") {
  ad::Graph g;
  gates::GateModel gm =
      gates::make_gate_model(g, gates::GateKind::cstg, 10, 2, {{10, nn::Activation::sigmoid}},
                             0.5, 3);
  Rng rng(4);
  std::vector<double> zv(8 * 2);
  for (double& v : zv) v = rng.uniform(-2, 2);
  ad::Tensor z = g.tensor({8, 2}, zv);
  for (auto mode : {gates::Mode::train, gates::Mode::eval}) {
    auto go = gates::gate_forward(gm, z, mode, rng);
    for (double v : go.gate.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("global gates repeat identically across the batch") {
  ad::Graph g;
  gates::GateModel gm = global_model(g, {0.2, 0.7, 0.4});
  ad::Tensor z = g.tensor({5, 2}, std::vector<double>(10, 0.3));
  Rng rng(0);
  auto go = gates::gate_forward(gm, z, gates::Mode::eval, rng);
  for (int i = 1; i < 5; ++i) {
    for (int d = 0; d < 3; ++d) CHECK(go.gate.at(i, d) == go.gate.at(0, d));
  }
}

TEST_CASE("apply_gates masks and optionally weights") {
  ad::Graph g;
  ad::Tensor x = g.tensor({1, 2}, {2, 3});
  gates::GateOutput go;
  SUBCASE("mask only") {
    go.gate = g.tensor({1, 2}, {1, 0});
    CHECK(gates::apply_gates(x, go).values() == std::vector<double>{2, 0});
  }
  SUBCASE("mask and weight") {
    go.gate = g.tensor({1, 2}, {1, 1});
    go.weight = g.tensor({1, 2}, {0.5, -1});
    CHECK(gates::apply_gates(x, go).values() == std::vector<double>{1, -3});
  }
  SUBCASE("all-open gates leave x unchanged") {
    go.gate = g.tensor({1, 2}, {1, 1});
    CHECK(gates::apply_gates(x, go).values() == x.values());
  }
}

TEST_CASE("expected open gates matches the closed form") {
  ad::Graph g;
  SUBCASE("mu = 0 rows give D/2") {
    gates::GateModel gm = global_model(g, {0.0, 0.0, 0.0});
    gm.sigma = 0.7;
    ad::Tensor z = g.tensor({1, 1}, {0.0});
    CHECK(gates::expected_open_gates(gm, z).values()[0] == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("mu = 0.5, sigma = 0.5 gives 2 Phi(1)") {
    gates::GateModel gm = global_model(g, {0.5, 0.5});
    gm.sigma = 0.5;
    ad::Tensor z = g.tensor({1, 1}, {0.0});
    const double expect = 2.0 * fdtest::phi_quadrature(1.0);
    CHECK(expect == doctest::Approx(1.682689).epsilon(1e-5));
    CHECK(gates::expected_open_gates(gm, z).values()[0] ==
          doctest::Approx(expect).epsilon(1e-9));
  }
  SUBCASE("saturated mu gives ~1 per gate") {
    gates::GateModel gm = global_model(g, {10.0});
    gm.sigma = 0.5;
    ad::Tensor z = g.tensor({1, 1}, {0.0});
    CHECK(gates::expected_open_gates(gm, z).values()[0] == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("expected open gates is monotone in mu with gradient pdf(mu/sigma)/sigma") {
  const double sigma = 0.6;
  ad::Graph g;
  ad::Tensor mu = g.tensor({1, 4}, {-0.8, 0.1, 0.4, 1.3}, true);
  ad::Tensor eog = gates::expected_open_gates_from_mu(mu, sigma);
  g.backward(ad::sum(eog));
  for (int d = 0; d < 4; ++d) {
    const double m = mu.values()[d];
    const double analytic = ad::std_normal_pdf(m / sigma) / sigma;
    CHECK(std::abs(mu.grad()[d] - analytic) < 1e-12);
    auto eval = [&](double delta) {
      ad::Graph g2;
      auto v = mu.values();
      v[d] += delta;
      return ad::sum(gates::expected_open_gates_from_mu(g2.tensor({1, 4}, v), sigma)).scalar();
    };
    const double fd = (eval(1e-5) - eval(-1e-5)) / 2e-5;
    CHECK(std::abs(mu.grad()[d] - fd) < 1e-5);
    CHECK(mu.grad()[d] > 0.0);  // monotone nondecreasing
  }
}

TEST_CASE("select_features applies a strict threshold to eval gates") {
  ad::Graph g;
  SUBCASE("mixed mu") {
    gates::GateModel gm = global_model(g, {0.9, 0.1, 0.6});
    auto sel = gates::select_features(gm, {}, 0.5);
    CHECK(sel.indices == std::vector<int>{0, 2});
  }
  SUBCASE("all-zero mu selects nothing at any tau >= 0") {
    gates::GateModel gm = global_model(g, {0.0, 0.0});
    for (double tau : {0.0, 0.3, 0.9}) {
      CHECK(gates::select_features(gm, {}, tau).indices.empty());
    }
  }
  SUBCASE("tau outside [0,1] is a configuration error") {
    gates::GateModel gm = global_model(g, {0.5});
    CHECK_THROWS_AS(gates::select_features(gm, {}, 1.5), ConfigError);
    CHECK_THROWS_AS(gates::select_features(gm, {}, -0.1), ConfigError);
  }
}

TEST_CASE("weighted c-stg with W=0, b=1 reproduces c-stg exactly") {
  // constant-1 weights make the two forward functions identical
  ad::Graph g;
  const std::vector<nn::LayerSpec> arch = {{6, nn::Activation::relu},
                                           {4, nn::Activation::sigmoid}};
  gates::GateModel weighted =
      gates::make_gate_model(g, gates::GateKind::weighted_cstg, 4, 2, arch, 0.5, 7);
  std::fill(weighted.weight_head->W.values().begin(), weighted.weight_head->W.values().end(), 0.0);
  std::fill(weighted.weight_head->b.values().begin(), weighted.weight_head->b.values().end(), 1.0);

  gates::GateModel plain = gates::make_gate_model(g, gates::GateKind::cstg, 4, 2, arch, 0.5, 7);
  for (std::size_t l = 0; l < plain.hyper->layers().size(); ++l) {
    plain.hyper->layers()[l].weight.values() = weighted.hyper->layers()[l].weight.values();
    plain.hyper->layers()[l].bias.values() = weighted.hyper->layers()[l].bias.values();
  }

  ad::Tensor z = g.tensor({3, 2}, {1, 0, 0, 1, 0.5, 0.5});
  ad::Tensor x = g.tensor({3, 4}, {1, -2, 0.5, 3, 0, 1, 2, -1, 4, 4, -4, 0.25});
  for (auto mode : {gates::Mode::eval, gates::Mode::train}) {
    Rng rng_a(5), rng_b(5);
    auto go_w = gates::gate_forward(weighted, z, mode, rng_a);
    auto go_p = gates::gate_forward(plain, z, mode, rng_b);
    CHECK(go_w.gate.values() == go_p.gate.values());
    for (double w : go_w.weight.values()) CHECK(w == 1.0);
    CHECK(gates::apply_gates(x, go_w).values() == gates::apply_gates(x, go_p).values());
  }
}

TEST_CASE("hypernetwork gains a final projection when widths disagree") {
  ad::Graph g;
  // published layers end at width 10, D = 20
  gates::GateModel gm = gates::make_gate_model(
      g, gates::GateKind::cstg, 20, 3,
      {{100, nn::Activation::relu}, {10, nn::Activation::sigmoid}}, 0.5, 2);
  CHECK(gm.hyper->layers().size() == 3);
  CHECK(gm.hyper->out_dim() == 20);
  CHECK(gm.hyper->layers().back().activation == nn::Activation::sigmoid);
  Rng rng(0);
  ad::Tensor z = g.tensor({1, 3}, {1, 0, 0});
  auto go = gates::gate_forward(gm, z, gates::Mode::eval, rng);
  CHECK(go.mu.shape() == ad::Shape{1, 20});
}

TEST_CASE("context width mismatch raises a dimension error") {
  ad::Graph g;
  gates::GateModel gm =
      gates::make_gate_model(g, gates::GateKind::cstg, 4, 3, {{4, nn::Activation::sigmoid}}, 0.5, 1);
  Rng rng(0);
  ad::Tensor z = g.tensor({1, 2}, {1, 0});
  CHECK_THROWS_AS(gates::gate_forward(gm, z, gates::Mode::eval, rng), DimensionError);
}

TEST_CASE("gate model json round-trips") {
  ad::Graph g;
  gates::GateModel gm = gates::make_gate_model(
      g, gates::GateKind::weighted_cstg, 5, 2,
      {{4, nn::Activation::relu}, {5, nn::Activation::sigmoid}}, 0.3, 11);
  auto j = gates::gate_model_to_json(gm);
  ad::Graph g2;
  gates::GateModel back = gates::gate_model_from_json(g2, j);
  CHECK(back.kind == gm.kind);
  CHECK(back.sigma == gm.sigma);
  CHECK(back.num_features == gm.num_features);
  CHECK(back.weight_head->W.values() == gm.weight_head->W.values());
  Rng rng_a(3), rng_b(3);
  ad::Tensor za = g.tensor({1, 2}, {0.7, 0.1});
  ad::Tensor zb = g2.tensor({1, 2}, {0.7, 0.1});
  auto ga_ = gates::gate_forward(gm, za, gates::Mode::eval, rng_a);
  auto gb_ = gates::gate_forward(back, zb, gates::Mode::eval, rng_b);
  CHECK(ga_.gate.values() == gb_.gate.values());
  CHECK(ga_.weight.values() == gb_.weight.values());
}
