#include <doctest.h>

#include <cmath>
#include <limits>

#include "cstg/gates.hpp"
#include "cstg/networks.hpp"
#include "cstg/objective.hpp"
#include "cstg/rng.hpp"

using namespace cstg;

TEST_CASE("mse basics") {
  ad::Graph g;
  ad::Tensor y = g.tensor({3}, {1, -2, 0.5});
  CHECK(obj::task_loss(obj::LossKind::mse, y, y).scalar() == 0.0);

  ad::Tensor yhat = g.tensor({2}, {0, 2});
  ad::Tensor target = g.tensor({2}, {0, 0});
  CHECK(obj::task_loss(obj::LossKind::mse, yhat, target).scalar() == doctest::Approx(2.0));
}

TEST_CASE("bce closed form and validation") {
  ad::Graph g;
  ad::Tensor yhat = g.tensor({1}, {0.5});
  ad::Tensor y = g.tensor({1}, {1.0});
  CHECK(obj::task_loss(obj::LossKind::bce, yhat, y).scalar() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  ad::Tensor bad = g.tensor({1}, {0.5});
  CHECK_THROWS_AS(obj::task_loss(obj::LossKind::bce, yhat, bad), DataError);

  ad::Tensor len = g.tensor({2}, {0.5, 0.5});
  CHECK_THROWS_AS(obj::task_loss(obj::LossKind::mse, yhat, len), DimensionError);
}

TEST_CASE("bce clamps extreme probabilities instead of producing infinities") {
  ad::Graph g;
  ad::Tensor yhat = g.tensor({2}, {0.0, 1.0}, true);
  ad::Tensor y = g.tensor({2}, {1.0, 0.0});
  ad::Tensor loss = obj::task_loss(obj::LossKind::bce, yhat, y);
  CHECK(std::isfinite(loss.scalar()));
  CHECK(loss.scalar() == doctest::Approx(-std::log(1e-12)).epsilon(1e-6));
}

TEST_CASE("empirical risk combines loss and the averaged regularizer") {
  ad::Graph g;
  SUBCASE("lambda = 0 leaves the loss untouched") {
    ad::Tensor loss = g.scalar(0.37);
    ad::Tensor reg = g.tensor({2}, {5, 9});
    CHECK(obj::empirical_risk(loss, reg, 0.0).scalar() == 0.37);
  }
  SUBCASE("hand arithmetic") {
    ad::Tensor loss = g.scalar(1.0);
    ad::Tensor reg = g.tensor({2}, {2, 4});
    CHECK(obj::empirical_risk(loss, reg, 0.5).scalar() == doctest::Approx(2.5));
  }
  SUBCASE("all-zero mu rows, D = 25, lambda = 0.1") {
    ad::Tensor mu = g.tensor({4, 25}, std::vector<double>(100, 0.0));
    ad::Tensor reg = gates::expected_open_gates_from_mu(mu, 0.5);
    ad::Tensor loss = g.scalar(0.0);
    CHECK(obj::empirical_risk(loss, reg, 0.1).scalar() == doctest::Approx(1.25));
  }
}

TEST_CASE("regularizer contribution is linear and nondecreasing in lambda") {
  ad::Graph g;
  Rng rng(5);
  std::vector<double> mu(3 * 7);
  for (double& v : mu) v = rng.uniform(-1, 1);
  ad::Tensor reg = gates::expected_open_gates_from_mu(g.tensor({3, 7}, mu), 0.5);
  ad::Tensor loss = g.scalar(0.9);
  double prev = -1.0;
  for (double lambda : {0.0, 1e-3, 1e-2, 1e-1, 1.0}) {
    const double contribution = obj::empirical_risk(loss, reg, lambda).scalar() - 0.9;
    CHECK(contribution >= prev);
    prev = contribution;
  }
}

TEST_CASE("risk gradients match finite differences on a 5-feature 2-context toy") {
  // end-to-end: hyper -> gates (eval path keeps it deterministic) -> mask ->
  // linear predictor -> mse + lambda * mean reg
  Rng rng(31);
  const int n = 4, d = 5, l = 2;
  std::vector<double> xv(n * d), zv(n * l), yv(n);
  for (double& v : xv) v = rng.uniform(-1, 1);
  for (int i = 0; i < n; ++i) zv[i * l + (i % 2)] = 1.0;
  for (double& v : yv) v = rng.uniform(-1, 1);

  auto build = [&](ad::Graph& g, std::vector<ad::Tensor>* params) {
    gates::GateModel gm = gates::make_gate_model(g, gates::GateKind::cstg, d, l,
                                                 {{d, nn::Activation::sigmoid}}, 0.5, 3);
    nn::Mlp pred = nn::build_mlp(g, d, {{1, nn::Activation::none}}, 4);
    if (params) {
      *params = gm.parameters();
      for (auto& p : pred.parameters()) params->push_back(p);
    }
    ad::Tensor x = g.tensor({n, d}, xv);
    ad::Tensor z = g.tensor({n, l}, zv);
    ad::Tensor y = g.tensor({n, 1}, yv);
    Rng unused(0);
    gates::GateOutput go = gates::gate_forward(gm, z, gates::Mode::eval, unused);
    ad::Tensor yhat = pred.forward(gates::apply_gates(x, go));
    ad::Tensor loss = obj::task_loss(obj::LossKind::mse, yhat, y);
    ad::Tensor reg = gates::expected_open_gates_from_mu(go.mu, gm.sigma);
    return obj::empirical_risk(loss, reg, 0.3);
  };

  ad::Graph g;
  std::vector<ad::Tensor> params;
  ad::Tensor risk = build(g, &params);
  g.backward(risk);

  // finite differences over every parameter element
  const double h = 1e-5;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    for (std::size_t i = 0; i < params[pi].numel(); ++i) {
      auto eval_with = [&](double delta) {
        // rebuild deterministically with one element nudged before forward
        ad::Graph g2;
        gates::GateModel gm = gates::make_gate_model(g2, gates::GateKind::cstg, d, l,
                                                     {{d, nn::Activation::sigmoid}}, 0.5, 3);
        nn::Mlp pred = nn::build_mlp(g2, d, {{1, nn::Activation::none}}, 4);
        std::vector<ad::Tensor> params2 = gm.parameters();
        for (auto& p : pred.parameters()) params2.push_back(p);
        params2[pi].values()[i] += delta;
        ad::Tensor x = g2.tensor({n, d}, xv);
        ad::Tensor z = g2.tensor({n, l}, zv);
        ad::Tensor y = g2.tensor({n, 1}, yv);
        Rng unused(0);
        gates::GateOutput go = gates::gate_forward(gm, z, gates::Mode::eval, unused);
        ad::Tensor yhat = pred.forward(gates::apply_gates(x, go));
        ad::Tensor loss = obj::task_loss(obj::LossKind::mse, yhat, y);
        ad::Tensor reg = gates::expected_open_gates_from_mu(go.mu, gm.sigma);
        return obj::empirical_risk(loss, reg, 0.3).scalar();
      };
      const double fd = (eval_with(h) - eval_with(-h)) / (2 * h);
      const double adg = params[pi].has_grad() ? params[pi].grad()[i] : 0.0;
      const double err = std::abs(adg - fd) / std::max({1.0, std::abs(adg), std::abs(fd)});
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("lasso with huge l1 shrinks to the intercept-only model") {
  Matrix X(4, 2);
  X.at(0, 0) = 1.0;
  X.at(1, 0) = -0.5;
  X.at(2, 1) = 2.0;
  X.at(3, 1) = 0.25;
  std::vector<double> y = {3, 1, 2, 4};
  obj::LassoResult fit = obj::lasso_fit(X, y, 1e6, obj::LossKind::mse);
  for (double b : fit.beta) CHECK(b == 0.0);
  CHECK(fit.intercept == doctest::Approx(2.5).epsilon(1e-4));  // mean(y)
}

TEST_CASE("lasso at lambda1=0 matches the normal-equations oracle on orthonormal columns") {
  // X columns e1, e2; oracle solved by hand: b = mean(y3, y4), beta_j = y_j - b
  Matrix X(4, 2);
  X.at(0, 0) = 1.0;
  X.at(1, 1) = 1.0;
  std::vector<double> y = {0.7, -0.3, 0.0, 0.0};
  obj::LassoResult fit = obj::lasso_fit(X, y, 0.0, obj::LossKind::mse, 50000);
  CHECK(std::abs(fit.beta[0] - 0.7) < 1e-6);
  CHECK(std::abs(fit.beta[1] - (-0.3)) < 1e-6);
  CHECK(std::abs(fit.intercept) < 1e-6);
}

TEST_CASE("1-d lasso reproduces the closed-form soft-threshold solution") {
  // ols coefficient 1, threshold lambda/2 under (1/n) Sum (x b - y)^2 -> 0.75
  Matrix X(2, 1);
  X.at(0, 0) = 1.0;
  X.at(1, 0) = -1.0;
  std::vector<double> y = {1, -1};
  obj::LassoResult fit = obj::lasso_fit(X, y, 0.5, obj::LossKind::mse, 50000);
  CHECK(fit.beta[0] == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(std::abs(fit.intercept) < 1e-9);
}

TEST_CASE("lasso objective is nonincreasing across iterations") {
  Rng rng(77);
  Matrix X(40, 6);
  for (double& v : X.data) v = rng.normal();
  std::vector<double> y(40);
  for (int i = 0; i < 40; ++i) y[i] = 2 * X.at(i, 0) - X.at(i, 3) + 0.1 * rng.normal();
  std::vector<double> trace;
  obj::lasso_fit(X, y, 0.05, obj::LossKind::mse, 2000, &trace);
  REQUIRE(trace.size() > 2);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i] <= trace[i - 1] + 1e-12);
  }
}

TEST_CASE("lasso logistic path fits a separable toy") {
  Matrix X(6, 1);
  std::vector<double> y(6);
  for (int i = 0; i < 6; ++i) {
    X.at(i, 0) = i < 3 ? -1.0 : 1.0;
    y[i] = i < 3 ? 0.0 : 1.0;
  }
  obj::LassoResult fit = obj::lasso_fit(X, y, 0.01, obj::LossKind::bce, 5000);
  CHECK(fit.beta[0] > 0.5);  // positive weight separates the classes
}

TEST_CASE("lasso rejects non-finite data") {
  Matrix X(2, 1);
  X.at(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(obj::lasso_fit(X, {1, 2}, 0.1, obj::LossKind::mse), DataError);
}
