// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace rrd {

struct Shape {
  int64_t rows{0};
  int64_t cols{0};

  int64_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
};

namespace detail {

struct TensorNode;

// Scratch gradients for one backward() traversal, keyed by node. Kept separate
// from the persistent per-tensor grad buffers so that calling backward() twice
// accumulates instead of double-counting partial sums.
using GradMap = std::unordered_map<TensorNode*, std::vector<double>>;

using BackpropFn = std::function<void(const std::vector<double>& upstream, GradMap& scratch)>;

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // persistent accumulated gradient; empty until needed
  bool requires_grad{false};
  std::vector<std::shared_ptr<TensorNode>> parents;
  BackpropFn backprop;  // empty for leaves and constant results
};

// Fetches (allocating on demand) the scratch gradient buffer for a node.
std::vector<double>& scratch_grad(GradMap& scratch, TensorNode* node);

bool grad_mode_enabled();

}  // namespace detail

// Disables graph construction for its lifetime (per thread). Forward passes run
// under this guard produce plain value tensors regardless of requires_grad.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// 2-D row-major tensor of doubles with reverse-mode autodiff. Value semantics:
// copying a Tensor aliases the same node, so parameter updates through one
// handle are visible through all of them.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // 1 x v.size() row vector
  static Tensor row(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t rows() const { return shape().rows; }
  int64_t cols() const { return shape().cols; }
  int64_t size() const { return shape().size(); }

  std::vector<double>& data();
  const std::vector<double>& data() const;
  double at(int64_t r, int64_t c) const;
  double& at(int64_t r, int64_t c);
  // Value of a 1x1 tensor.
  double value() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Copies values into a fresh graph-free, grad-free tensor.
  Tensor detach() const;

  // Reverse-mode sweep from a scalar. Gradients accumulate into each reachable
  // requires_grad tensor's persistent buffer (allocated on first use).
  void backward() const;

  detail::TensorNode* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor make_op_result(Shape shape, std::vector<double> data,
                               std::vector<Tensor> parents, detail::BackpropFn fn);
};

// Elementwise binary ops. Shapes must match exactly, except that a 1x1 operand
// broadcasts against any shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor div_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
// Errors on non-positive entries.
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);

// Full reductions to a 1x1 scalar. Serial accumulation in element order.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// [n x k] . [k x m] -> [n x m]
Tensor matmul(const Tensor& a, const Tensor& b);
// a . b^T without materializing the transpose: [n x d] , [m x d] -> [n x m]
Tensor matmul_transposed(const Tensor& a, const Tensor& b);
// x[n x m] + row[1 x m] broadcast down the rows (bias addition)
Tensor add_row_broadcast(const Tensor& x, const Tensor& row);
// Per-row dot product of two [n x d] tensors -> [n x 1]
Tensor rows_dot(const Tensor& a, const Tensor& b);
// Horizontal concatenation: [n x c1] , [n x c2] -> [n x (c1+c2)]
Tensor concat_cols(const Tensor& a, const Tensor& b);

// Scales each row to unit Euclidean norm. A row with norm below 1e-12 is a
// degenerate input and raises std::domain_error.
Tensor row_l2_normalize(const Tensor& x);

// Per-row softmax / log-softmax of x / temperature, max-subtracted for
// stability. temperature must be positive.
Tensor softmax_rows(const Tensor& x, double temperature);
Tensor log_softmax_rows(const Tensor& x, double temperature);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

}  // namespace rrd
