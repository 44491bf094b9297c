#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cstg/errors.hpp"

namespace cstg::ad {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

class Graph;

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
};
}  // namespace detail

// Dense real tensor participating in a reverse-mode graph. A Tensor is a
// cheap handle; copies alias the same storage. Values of leaf tensors may
// be updated in place between forward passes (that is how SGD steps work).
class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const { return d_->shape; }
  int dim(int i) const { return d_->shape[static_cast<std::size_t>(i)]; }
  std::size_t numel() const { return d_->value.size(); }
  bool requires_grad() const { return d_->requires_grad; }
  bool has_grad() const { return !d_->grad.empty(); }

  std::vector<double>& values() { return d_->value; }
  const std::vector<double>& values() const { return d_->value; }

  // Accumulated gradient; empty until backward() reaches this tensor.
  const std::vector<double>& grad() const { return d_->grad; }
  void zero_grad() { d_->grad.clear(); }

  double at(int r, int c) const;
  double scalar() const;

  int node_id() const { return node_id_; }
  Graph* graph() const { return graph_; }
  explicit operator bool() const { return static_cast<bool>(d_); }

  // Internal: op implementations keep storage alive through this handle.
  const std::shared_ptr<detail::TensorData>& internal_data() const { return d_; }

 private:
  std::shared_ptr<detail::TensorData> d_;
  Graph* graph_ = nullptr;
  int node_id_ = -1;
  friend class Graph;
};

// Records operations in insertion order; backward() replays the tape in
// reverse. A Graph and its tensors are confined to one thread; independent
// graphs may run in parallel.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Tensor tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  Tensor zeros(Shape shape, bool requires_grad = false);
  Tensor full(Shape shape, double v, bool requires_grad = false);
  Tensor scalar(double v) { return tensor({1}, {v}); }

  // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
  // accumulate across calls until tensors are zero_grad()ed.
  void backward(const Tensor& loss);

  // Drops all recorded operations. Leaf tensors (parameters, constants)
  // survive as long as a handle exists.
  void clear_tape() { tape_.clear(); }
  std::size_t tape_size() const { return tape_.size(); }

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  // Scoped inference mode: no backward records while alive.
  class NoGrad {
   public:
    explicit NoGrad(Graph& g) : g_(g), prev_(g.recording_) { g.recording_ = false; }
    ~NoGrad() { g_.recording_ = prev_; }
    NoGrad(const NoGrad&) = delete;

   private:
    Graph& g_;
    bool prev_;
  };

  // Internal: used by the op implementations.
  void record(const char* op, std::vector<int> input_ids, const Tensor& output,
              std::function<void()> backward_fn);

 private:
  struct Record {
    const char* op;
    std::vector<int> inputs;
    int output;
    std::shared_ptr<detail::TensorData> output_data;
    std::function<void()> backward;
  };
  std::vector<Record> tape_;
  int next_id_ = 0;
  bool recording_ = true;
};

// ---- Operations ----------------------------------------------------------
// Binary elementwise ops support equal shapes or scalar-vs-tensor only.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// Gradient passes iff the input is strictly inside (lo, hi); the boundary
// subgradient is fixed to 0.
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor clamp01(const Tensor& a);
Tensor log(const Tensor& a);
// Standard Gaussian CDF, elementwise; backward multiplies by the pdf.
Tensor normal_cdf(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x: [m x n], bias: [n]; adds the bias to every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// v: [n] (or [1 x n]); stacks it into [rows x n].
Tensor repeat_rows(const Tensor& v, int rows);
Tensor sum(const Tensor& a);      // -> scalar [1]
Tensor row_sum(const Tensor& a);  // [m x n] -> [m]

// Scalar helpers shared with non-graph code (reports, oracles).
double std_normal_cdf(double x);
double std_normal_pdf(double x);

}  // namespace cstg::ad
