#include "cstg/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace cstg::ad {

namespace {

using detail::TensorData;
using Data = std::shared_ptr<TensorData>;

void ensure_grad(const Data& d) {
  if (d->grad.empty()) d->grad.assign(d->value.size(), 0.0);
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Graph* graph_of(const Tensor& a, const Tensor& b) {
  if (a.graph() != b.graph()) {
    throw ContractError("operands belong to different graphs");
  }
  return a.graph();
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) n *= static_cast<std::size_t>(d);
  return n;
}

double Tensor::at(int r, int c) const {
  const int cols = d_->shape.back();
  return d_->value[static_cast<std::size_t>(r) * cols + c];
}

double Tensor::scalar() const {
  if (numel() != 1) {
    throw ContractError("scalar() called on tensor of shape " + shape_str(shape()));
  }
  return d_->value[0];
}

Tensor Graph::tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) throw ContractError("tensor shape must be non-empty");
  for (int d : shape) {
    if (d <= 0) throw ContractError("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.d_ = std::make_shared<TensorData>();
  t.d_->shape = std::move(shape);
  t.d_->value = std::move(values);
  t.d_->requires_grad = requires_grad;
  t.graph_ = this;
  t.node_id_ = next_id_++;
  return t;
}

Tensor Graph::zeros(Shape shape, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), 0.0);
  return tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Graph::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return tensor(std::move(shape), std::move(v), requires_grad);
}

void Graph::record(const char* op, std::vector<int> input_ids, const Tensor& output,
                   std::function<void()> backward_fn) {
  tape_.push_back(Record{op, std::move(input_ids), output.node_id(), output.internal_data(),
                         std::move(backward_fn)});
}

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  // Op outputs get a fresh gradient each pass; only leaf gradients persist,
  // so repeated calls accumulate d(loss)/d(leaf).
  for (auto& rec : tape_) rec.output_data->grad.clear();
  ensure_grad(loss.d_);
  loss.d_->grad[0] += 1.0;
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
    it->backward();
  }
}

namespace {

const Data& data_of(const Tensor& t) { return t.internal_data(); }

enum class BinOp { add, sub, mul };

Tensor binary_elementwise(const char* name, BinOp op, const Tensor& a, const Tensor& b) {
  Graph* g = graph_of(a, b);
  const bool a_scalar = a.numel() == 1;
  const bool b_scalar = b.numel() == 1;
  if (!same_shape(a.shape(), b.shape()) && !a_scalar && !b_scalar) {
    throw DimensionError(std::string(name) + ": incompatible shapes " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t n = std::max(av.size(), bv.size());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = av[a_scalar ? 0 : i];
    const double y = bv[b_scalar ? 0 : i];
    switch (op) {
      case BinOp::add: out[i] = x + y; break;
      case BinOp::sub: out[i] = x - y; break;
      case BinOp::mul: out[i] = x * y; break;
    }
  }
  Shape shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  Tensor result = g->tensor(std::move(shape), std::move(out),
                            a.requires_grad() || b.requires_grad());
  if (g->recording() && result.requires_grad()) {
    Data ad = data_of(a);
    Data bd = data_of(b);
    Data od = data_of(result);
    g->record(name, {a.node_id(), b.node_id()}, result,
              [op, ad, bd, od, a_scalar, b_scalar]() {
                if (od->grad.empty()) return;
                const auto& og = od->grad;
                if (ad->requires_grad) {
                  ensure_grad(ad);
                  for (std::size_t i = 0; i < og.size(); ++i) {
                    double gi = og[i];
                    if (op == BinOp::mul) gi *= bd->value[b_scalar ? 0 : i];
                    ad->grad[a_scalar ? 0 : i] += gi;
                  }
                }
                if (bd->requires_grad) {
                  ensure_grad(bd);
                  for (std::size_t i = 0; i < og.size(); ++i) {
                    double gi = og[i];
                    if (op == BinOp::mul) gi *= ad->value[a_scalar ? 0 : i];
                    if (op == BinOp::sub) gi = -gi;
                    bd->grad[b_scalar ? 0 : i] += gi;
                  }
                }
              });
  }
  return result;
}

// Unary elementwise helper: forward maps value, backward multiplies the
// upstream gradient by dfn(input value, output value).
template <class Fwd, class Dfn>
Tensor unary_elementwise(const char* name, const Tensor& a, Fwd fwd, Dfn dfn) {
  Graph* g = a.graph();
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  Tensor result = g->tensor(a.shape(), std::move(out), a.requires_grad());
  if (g->recording() && result.requires_grad()) {
    auto ad = data_of(a);
    auto od = data_of(result);
    g->record(name, {a.node_id()}, result, [ad, od, dfn]() {
      if (od->grad.empty() || !ad->requires_grad) return;
      ensure_grad(ad);
      for (std::size_t i = 0; i < od->grad.size(); ++i) {
        ad->grad[i] += od->grad[i] * dfn(ad->value[i], od->value[i]);
      }
    });
  }
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_elementwise("add", BinOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elementwise("sub", BinOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_elementwise("mul", BinOp::mul, a, b); }

Tensor scale(const Tensor& a, double c) {
  return unary_elementwise("scale", a,
                           [c](double v) { return c * v; },
                           [c](double, double) { return c; });
}

Tensor relu(const Tensor& a) {
  return unary_elementwise("relu", a,
                           [](double v) { return v > 0.0 ? v : 0.0; },
                           [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise("sigmoid", a,
                           [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                           [](double, double y) { return y * (1.0 - y); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo < hi)) throw ContractError("clamp requires lo < hi");
  return unary_elementwise("clamp", a,
                           [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
                           [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor clamp01(const Tensor& a) { return clamp(a, 0.0, 1.0); }

Tensor log(const Tensor& a) {
  return unary_elementwise("log", a,
                           [](double v) { return std::log(v); },
                           [](double v, double) { return 1.0 / v; });
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double std_normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

Tensor normal_cdf(const Tensor& a) {
  return unary_elementwise("normal_cdf", a,
                           [](double v) { return std_normal_cdf(v); },
                           [](double v, double) { return std_normal_pdf(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Graph* g = graph_of(a, b);
  if (a.shape().size() != 2 || b.shape().size() != 2) {
    throw DimensionError("matmul requires 2-d tensors, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1);
  const int k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      const double aik = av[static_cast<std::size_t>(i) * k + kk];
      if (aik == 0.0) continue;
      const double* brow = &bv[static_cast<std::size_t>(kk) * n];
      double* orow = &out[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  Tensor result = g->tensor({m, n}, std::move(out), a.requires_grad() || b.requires_grad());
  if (g->recording() && result.requires_grad()) {
    auto adp = data_of(a);
    auto bdp = data_of(b);
    auto od = data_of(result);
    g->record("matmul", {a.node_id(), b.node_id()}, result, [adp, bdp, od, m, k, n]() {
      if (od->grad.empty()) return;
      const auto& og = od->grad;
      if (adp->requires_grad) {
        ensure_grad(adp);
        // dA = G . B^T
        for (int i = 0; i < m; ++i) {
          const double* grow = &og[static_cast<std::size_t>(i) * n];
          for (int kk = 0; kk < k; ++kk) {
            const double* brow = &bdp->value[static_cast<std::size_t>(kk) * n];
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            adp->grad[static_cast<std::size_t>(i) * k + kk] += acc;
          }
        }
      }
      if (bdp->requires_grad) {
        ensure_grad(bdp);
        // dB = A^T . G
        for (int i = 0; i < m; ++i) {
          const double* grow = &og[static_cast<std::size_t>(i) * n];
          for (int kk = 0; kk < k; ++kk) {
            const double aik = adp->value[static_cast<std::size_t>(i) * k + kk];
            if (aik == 0.0) continue;
            double* brow = &bdp->grad[static_cast<std::size_t>(kk) * n];
            for (int j = 0; j < n; ++j) brow[j] += aik * grow[j];
          }
        }
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  Graph* g = a.graph();
  if (a.shape().size() != 2) {
    throw DimensionError("transpose requires a 2-d tensor, got " + shape_str(a.shape()));
  }
  const int m = a.dim(0), n = a.dim(1);
  const auto& av = a.values();
  std::vector<double> out(av.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j) * m + i] = av[static_cast<std::size_t>(i) * n + j];
  Tensor result = g->tensor({n, m}, std::move(out), a.requires_grad());
  if (g->recording() && result.requires_grad()) {
    auto ad = data_of(a);
    auto od = data_of(result);
    g->record("transpose", {a.node_id()}, result, [ad, od, m, n]() {
      if (od->grad.empty() || !ad->requires_grad) return;
      ensure_grad(ad);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          ad->grad[static_cast<std::size_t>(i) * n + j] +=
              od->grad[static_cast<std::size_t>(j) * m + i];
    });
  }
  return result;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  Graph* g = graph_of(x, bias);
  if (x.shape().size() != 2 || bias.numel() != static_cast<std::size_t>(x.dim(1))) {
    throw DimensionError("add_bias: shapes " + shape_str(x.shape()) + " vs " +
                         shape_str(bias.shape()));
  }
  const int m = x.dim(0), n = x.dim(1);
  const auto& xv = x.values();
  const auto& bv = bias.values();
  std::vector<double> out(xv.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] = xv[static_cast<std::size_t>(i) * n + j] + bv[j];
  Tensor result = g->tensor(x.shape(), std::move(out), x.requires_grad() || bias.requires_grad());
  if (g->recording() && result.requires_grad()) {
    auto xd = data_of(x);
    auto bd = data_of(bias);
    auto od = data_of(result);
    g->record("add_bias", {x.node_id(), bias.node_id()}, result, [xd, bd, od, m, n]() {
      if (od->grad.empty()) return;
      if (xd->requires_grad) {
        ensure_grad(xd);
        for (std::size_t i = 0; i < od->grad.size(); ++i) xd->grad[i] += od->grad[i];
      }
      if (bd->requires_grad) {
        ensure_grad(bd);
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j)
            bd->grad[j] += od->grad[static_cast<std::size_t>(i) * n + j];
      }
    });
  }
  return result;
}

Tensor repeat_rows(const Tensor& v, int rows) {
  Graph* g = v.graph();
  if (rows < 1) throw ContractError("repeat_rows requires rows >= 1");
  const bool row_vec = v.shape().size() == 1 ||
                       (v.shape().size() == 2 && v.dim(0) == 1);
  if (!row_vec) {
    throw DimensionError("repeat_rows requires a vector, got " + shape_str(v.shape()));
  }
  const int n = static_cast<int>(v.numel());
  const auto& vv = v.values();
  std::vector<double> out(static_cast<std::size_t>(rows) * n);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = vv[j];
  Tensor result = g->tensor({rows, n}, std::move(out), v.requires_grad());
  if (g->recording() && result.requires_grad()) {
    auto vd = data_of(v);
    auto od = data_of(result);
    g->record("repeat_rows", {v.node_id()}, result, [vd, od, rows, n]() {
      if (od->grad.empty() || !vd->requires_grad) return;
      ensure_grad(vd);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < n; ++j)
          vd->grad[j] += od->grad[static_cast<std::size_t>(i) * n + j];
    });
  }
  return result;
}

Tensor sum(const Tensor& a) {
  Graph* g = a.graph();
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor result = g->tensor({1}, {acc}, a.requires_grad());
  if (g->recording() && result.requires_grad()) {
    auto ad = data_of(a);
    auto od = data_of(result);
    g->record("sum", {a.node_id()}, result, [ad, od]() {
      if (od->grad.empty() || !ad->requires_grad) return;
      ensure_grad(ad);
      const double gl = od->grad[0];
      for (double& gi : ad->grad) gi += gl;
    });
  }
  return result;
}

Tensor row_sum(const Tensor& a) {
  Graph* g = a.graph();
  if (a.shape().size() != 2) {
    throw DimensionError("row_sum requires a 2-d tensor, got " + shape_str(a.shape()));
  }
  const int m = a.dim(0), n = a.dim(1);
  const auto& av = a.values();
  std::vector<double> out(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += av[static_cast<std::size_t>(i) * n + j];
    out[i] = acc;
  }
  Tensor result = g->tensor({m}, std::move(out), a.requires_grad());
  if (g->recording() && result.requires_grad()) {
    auto ad = data_of(a);
    auto od = data_of(result);
    g->record("row_sum", {a.node_id()}, result, [ad, od, m, n]() {
      if (od->grad.empty() || !ad->requires_grad) return;
      ensure_grad(ad);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          ad->grad[static_cast<std::size_t>(i) * n + j] += od->grad[i];
    });
  }
  return result;
}

}  // namespace cstg::ad
