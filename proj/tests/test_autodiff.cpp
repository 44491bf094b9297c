#include <doctest.h>

#include <cmath>

#include "cstg/autodiff.hpp"
#include "fd_utils.hpp"

using namespace cstg;

TEST_CASE("matmul forward matches hand arithmetic") {
  ad::Graph g;
  ad::Tensor eye = g.tensor({2, 2}, {1, 0, 0, 1});
  ad::Tensor v = g.tensor({2, 1}, {3, 4});
  ad::Tensor out = ad::matmul(eye, v);
  CHECK(out.values() == std::vector<double>{3, 4});

  ad::Tensor row = g.tensor({1, 2}, {1, 2});
  ad::Tensor col = g.tensor({2, 1}, {3, 4});
  CHECK(ad::matmul(row, col).scalar() == doctest::Approx(11.0));
}

TEST_CASE("matmul rejects mismatched inner dimensions, naming both shapes") {
  ad::Graph g;
  ad::Tensor a = g.tensor({2, 3}, std::vector<double>(6, 1.0));
  ad::Tensor b = g.tensor({2, 2}, std::vector<double>(4, 1.0));
  try {
    ad::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("gradient of sum(a.b) w.r.t. a matches the finite-difference oracle") {
  // frozen from central differences (h=1e-5): d/da sum(a.b) = b^T = [3, 4]
  ad::Graph g;
  ad::Tensor a = g.tensor({1, 2}, {1, 2}, true);
  ad::Tensor b = g.tensor({2, 1}, {3, 4});
  ad::Tensor loss = ad::sum(ad::matmul(a, b));
  g.backward(loss);
  CHECK(a.grad()[0] == doctest::Approx(3.0));
  CHECK(a.grad()[1] == doctest::Approx(4.0));

  auto fd = [&](int i) {
    const double h = 1e-5;
    auto eval = [&](double delta) {
      ad::Graph g2;
      std::vector<double> av = {1, 2};
      av[i] += delta;
      ad::Tensor a2 = g2.tensor({1, 2}, av);
      ad::Tensor b2 = g2.tensor({2, 1}, {3, 4});
      return ad::sum(ad::matmul(a2, b2)).scalar();
    };
    return (eval(h) - eval(-h)) / (2 * h);
  };
  CHECK(a.grad()[0] == doctest::Approx(fd(0)).epsilon(1e-4));
  CHECK(a.grad()[1] == doctest::Approx(fd(1)).epsilon(1e-4));
}

TEST_CASE("clamp01 forward and boundary subgradients") {
  ad::Graph g;
  ad::Tensor t = g.tensor({4}, {-0.3, 0.7, 1.2, 0.5}, true);
  ad::Tensor c = ad::clamp01(t);
  CHECK(c.values()[0] == 0.0);
  CHECK(c.values()[1] == doctest::Approx(0.7));
  CHECK(c.values()[2] == 1.0);
  g.backward(ad::sum(c));
  CHECK(t.grad()[0] == 0.0);  // below range: closed gate, no gradient
  CHECK(t.grad()[1] == 1.0);
  CHECK(t.grad()[2] == 0.0);  // above range
  CHECK(t.grad()[3] == 1.0);  // d/dv clamp01 at 0.5
}

TEST_CASE("clamp01 output always lies in [0,1]") {
  ad::Graph g;
  Rng rng(11);
  std::vector<double> v(64);
  for (double& x : v) x = rng.uniform(-5.0, 5.0);
  ad::Tensor c = ad::clamp01(g.tensor({8, 8}, v));
  for (double x : c.values()) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("normal cdf matches the quadrature oracle to 1e-7") {
  CHECK(ad::std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  // frozen from Simpson quadrature of the pdf (1e-9)
  CHECK(ad::std_normal_cdf(1.0) == doctest::Approx(0.841345).epsilon(1e-6));
  for (double x : {-3.0, -1.7, -0.4, 0.3, 0.9, 2.5}) {
    CHECK(std::abs(ad::std_normal_cdf(x) - fdtest::phi_quadrature(x)) < 1e-7);
  }
}

TEST_CASE("normal cdf symmetry and monotonicity") {
  for (double x : {0.3, 1.7}) {
    CHECK(std::abs(ad::std_normal_cdf(x) + ad::std_normal_cdf(-x) - 1.0) < 1e-7);
  }
  double prev = -1.0;
  for (double x = -6.0; x <= 6.0; x += 0.05) {
    const double v = ad::std_normal_cdf(x);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("normal cdf backward uses the pdf") {
  ad::Graph g;
  ad::Tensor t = g.tensor({3}, {-1.0, 0.0, 2.0}, true);
  g.backward(ad::sum(ad::normal_cdf(t)));
  for (int i = 0; i < 3; ++i) {
    CHECK(t.grad()[i] == doctest::Approx(ad::std_normal_pdf(t.values()[i])).epsilon(1e-12));
  }
}

TEST_CASE("backward of sum and sigmoid") {
  ad::Graph g;
  ad::Tensor t = g.tensor({3}, {1, 2, 3}, true);
  g.backward(ad::sum(t));
  CHECK(t.grad() == std::vector<double>{1, 1, 1});

  ad::Tensor s = g.tensor({1}, {0.0}, true);
  g.backward(ad::sum(ad::sigmoid(s)));
  CHECK(s.grad()[0] == doctest::Approx(0.25));  // sigma'(0) = 1/4
}

TEST_CASE("backward requires a scalar loss") {
  ad::Graph g;
  ad::Tensor t = g.tensor({2}, {1, 2}, true);
  CHECK_THROWS_AS(g.backward(t), ContractError);
}

TEST_CASE("repeated backward calls accumulate") {
  ad::Graph g;
  ad::Tensor t = g.tensor({2}, {1, 2}, true);
  ad::Tensor loss = ad::sum(t);
  g.backward(loss);
  g.backward(loss);
  CHECK(t.grad() == std::vector<double>{2, 2});
  t.zero_grad();
  g.clear_tape();
  ad::Tensor loss2 = ad::sum(ad::scale(t, 3.0));
  g.backward(loss2);
  CHECK(t.grad() == std::vector<double>{3, 3});
}

TEST_CASE("elementwise broadcasting is scalar-vs-tensor or equal shape only") {
  ad::Graph g;
  ad::Tensor a = g.tensor({2, 2}, {1, 2, 3, 4});
  ad::Tensor s = g.scalar(10.0);
  CHECK(ad::add(a, s).values() == std::vector<double>{11, 12, 13, 14});
  CHECK(ad::mul(s, a).values() == std::vector<double>{10, 20, 30, 40});
  ad::Tensor bad = g.tensor({4}, {1, 2, 3, 4});
  CHECK_THROWS_AS(ad::add(a, bad), DimensionError);
}

TEST_CASE("two-layer MLP gradients match central finite differences") {
  // random 2-layer MLP; all parameter grads vs the oracle, h=1e-5
  Rng rng(202);
  auto make_values = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
  };
  const std::vector<double> w1 = make_values(6), b1 = make_values(3), w2 = make_values(3),
                            b2 = make_values(1), xv = make_values(4);

  auto forward = [&](const std::vector<double>& w1v, const std::vector<double>& b1v,
                     const std::vector<double>& w2v, const std::vector<double>& b2v,
                     ad::Graph& g, std::vector<ad::Tensor>* params) {
    ad::Tensor x = g.tensor({2, 2}, xv);
    ad::Tensor W1 = g.tensor({3, 2}, w1v, true);
    ad::Tensor B1 = g.tensor({3}, b1v, true);
    ad::Tensor W2 = g.tensor({1, 3}, w2v, true);
    ad::Tensor B2 = g.tensor({1}, b2v, true);
    if (params) *params = {W1, B1, W2, B2};
    ad::Tensor h = ad::sigmoid(ad::add_bias(ad::matmul(x, ad::transpose(W1)), B1));
    ad::Tensor out = ad::add_bias(ad::matmul(h, ad::transpose(W2)), B2);
    return ad::sum(ad::mul(out, out));
  };

  ad::Graph g;
  std::vector<ad::Tensor> params;
  ad::Tensor loss = forward(w1, b1, w2, b2, g, &params);
  g.backward(loss);

  const double h = 1e-5;
  auto fd_check = [&](int which, std::vector<double> base) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      auto lo = base, hi = base;
      hi[i] += h;
      lo[i] -= h;
      auto eval = [&](const std::vector<double>& v) {
        ad::Graph g2;
        std::vector<std::vector<double>> all = {w1, b1, w2, b2};
        all[which] = v;
        return forward(all[0], all[1], all[2], all[3], g2, nullptr).scalar();
      };
      const double fd = (eval(hi) - eval(lo)) / (2 * h);
      const double adg = params[which].grad()[i];
      const double err = std::abs(adg - fd) / std::max({1.0, std::abs(adg), std::abs(fd)});
      CHECK(err < 1e-4);
    }
  };
  fd_check(0, w1);
  fd_check(1, b1);
  fd_check(2, w2);
  fd_check(3, b2);
}

TEST_CASE("random composed graphs match finite differences away from kinks") {
  Rng rng(7);
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    fdtest::Program prog = fdtest::random_program(rng);
    fdtest::GradCheck res = fdtest::check_program(prog, rng);
    INFO("trial ", trial, " max_err ", res.max_err);
    CHECK(res.ok);
    ++checked;
  }
  CHECK(checked == 25);
}

TEST_CASE("NoGrad suppresses tape growth") {
  ad::Graph g;
  ad::Tensor t = g.tensor({2}, {1, 2}, true);
  {
    ad::Graph::NoGrad guard(g);
    ad::Tensor u = ad::sigmoid(t);
    CHECK(g.tape_size() == 0);
    CHECK(u.values()[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  }
  ad::Tensor v = ad::sigmoid(t);
  CHECK(g.tape_size() == 1);
  (void)v;
}
