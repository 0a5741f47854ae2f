// SPDX-License-Identifier: Apache-2.0
#include "rrd/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "rrd/kernels.hpp"

namespace rrd {

namespace detail {

namespace {
thread_local int g_no_grad_depth = 0;
}

bool grad_mode_enabled() { return g_no_grad_depth == 0; }

std::vector<double>& scratch_grad(GradMap& scratch, TensorNode* node) {
  auto it = scratch.find(node);
  if (it == scratch.end()) {
    it = scratch.emplace(node, std::vector<double>(node->data.size(), 0.0)).first;
  }
  return it->second;
}

}  // namespace detail

NoGradGuard::NoGradGuard() { ++detail::g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --detail::g_no_grad_depth; }

namespace {

using detail::GradMap;
using detail::TensorNode;
using kernels::kParallelGrain;

std::shared_ptr<TensorNode> make_node(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.rows < 1 || shape.cols < 1) {
    throw std::invalid_argument("tensor shape " + shape.str() + " is empty");
  }
  if (static_cast<int64_t>(data.size()) != shape.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape.str());
  }
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": tensor is not defined");
}

std::string format_norm(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

}  // namespace

Tensor make_op_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                      detail::BackpropFn fn) {
  bool needs_grad = false;
  if (detail::grad_mode_enabled()) {
    for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  }
  auto node = make_node(shape, std::move(data), needs_grad);
  if (needs_grad) {
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node_);
    node->backprop = std::move(fn);
  }
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_node(shape, std::vector<double>(shape.size(), 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return Tensor(make_node(shape, std::vector<double>(shape.size(), value), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(make_node(shape, std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(make_node({1, 1}, {value}, requires_grad));
}

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const int64_t n = static_cast<int64_t>(values.size());
  return Tensor(make_node({1, n}, std::move(values), requires_grad));
}

const Shape& Tensor::shape() const {
  check_defined(*this, "shape");
  return node_->shape;
}

std::vector<double>& Tensor::data() {
  check_defined(*this, "data");
  return node_->data;
}

const std::vector<double>& Tensor::data() const {
  check_defined(*this, "data");
  return node_->data;
}

double Tensor::at(int64_t r, int64_t c) const {
  const Shape& s = shape();
  if (r < 0 || r >= s.rows || c < 0 || c >= s.cols) {
    throw std::out_of_range("tensor index (" + std::to_string(r) + ", " + std::to_string(c) +
                            ") out of range for shape " + s.str());
  }
  return node_->data[r * s.cols + c];
}

double& Tensor::at(int64_t r, int64_t c) {
  const Shape& s = shape();
  if (r < 0 || r >= s.rows || c < 0 || c >= s.cols) {
    throw std::out_of_range("tensor index (" + std::to_string(r) + ", " + std::to_string(c) +
                            ") out of range for shape " + s.str());
  }
  return node_->data[r * s.cols + c];
}

double Tensor::value() const {
  if (shape() != Shape{1, 1}) {
    throw std::invalid_argument("value() requires a 1x1 tensor, got " + shape().str());
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  check_defined(*this, "set_requires_grad");
  node_->requires_grad = value;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  check_defined(*this, "grad");
  if (node_->grad.empty()) {
    throw std::runtime_error("tensor has no gradient (backward has not reached it)");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  check_defined(*this, "zero_grad");
  if (!node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
}

Tensor Tensor::detach() const {
  check_defined(*this, "detach");
  return Tensor(make_node(node_->shape, node_->data, false));
}

void Tensor::backward() const {
  check_defined(*this, "backward");
  if (shape() != Shape{1, 1}) {
    throw std::invalid_argument("backward requires a scalar loss, got shape " + shape().str());
  }
  TensorNode* root = node_.get();
  if (!root->requires_grad) return;

  // Reverse post-order DFS over requires_grad ancestors gives a topological
  // order in which every consumer is processed before its inputs.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  visited.insert(root);
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& top = stack.back();
    TensorNode* n = top.first;
    if (top.second < n->parents.size()) {
      TensorNode* p = n->parents[top.second++].get();
      if (p->requires_grad && visited.insert(p).second) {
        stack.emplace_back(p, 0);
      }
      continue;
    }
    order.push_back(n);
    stack.pop_back();
  }

  GradMap scratch;
  scratch.emplace(root, std::vector<double>{1.0});
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    auto sit = scratch.find(n);
    if (sit == scratch.end()) continue;
    if (n->backprop) n->backprop(sit->second, scratch);
  }

  for (TensorNode* n : order) {
    auto sit = scratch.find(n);
    if (sit == scratch.end()) continue;
    if (n->grad.empty()) n->grad.assign(n->data.size(), 0.0);
    const std::vector<double>& g = sit->second;
    for (size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
  }
}

namespace {

// Resolves elementwise operand shapes: exact match, or a 1x1 operand
// broadcasting against the other shape.
struct BroadcastPlan {
  Shape out;
  bool a_scalar;  // a is 1x1 and broadcast against a larger b
  bool b_scalar;
};

BroadcastPlan resolve_elementwise(const Tensor& a, const Tensor& b, const char* op) {
  check_defined(a, op);
  check_defined(b, op);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return {sa, false, false};
  if (sa == Shape{1, 1}) return {sb, true, false};
  if (sb == Shape{1, 1}) return {sa, false, true};
  throw std::invalid_argument(std::string(op) + ": shapes " + sa.str() + " and " + sb.str() +
                              " are incompatible");
}

double sum_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const BroadcastPlan plan = resolve_elementwise(a, b, "add");
  const auto& av = a.data();
  const auto& bv = b.data();
  const int64_t n = plan.out.size();
  std::vector<double> out(n);
  const bool asc = plan.a_scalar;
  const bool bsc = plan.b_scalar;
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = av[asc ? 0 : i] + bv[bsc ? 0 : i];
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  return make_op_result(plan.out, std::move(out), {a, b},
                        [an, bn, asc, bsc](const std::vector<double>& g, GradMap& s) {
                          if (an->requires_grad) {
                            auto& ga = detail::scratch_grad(s, an);
                            if (asc) {
                              ga[0] += sum_of(g);
                            } else {
                              for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                            }
                          }
                          if (bn->requires_grad) {
                            auto& gb = detail::scratch_grad(s, bn);
                            if (bsc) {
                              gb[0] += sum_of(g);
                            } else {
                              for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                            }
                          }
                        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const BroadcastPlan plan = resolve_elementwise(a, b, "sub");
  const auto& av = a.data();
  const auto& bv = b.data();
  const int64_t n = plan.out.size();
  std::vector<double> out(n);
  const bool asc = plan.a_scalar;
  const bool bsc = plan.b_scalar;
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = av[asc ? 0 : i] - bv[bsc ? 0 : i];
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  return make_op_result(plan.out, std::move(out), {a, b},
                        [an, bn, asc, bsc](const std::vector<double>& g, GradMap& s) {
                          if (an->requires_grad) {
                            auto& ga = detail::scratch_grad(s, an);
                            if (asc) {
                              ga[0] += sum_of(g);
                            } else {
                              for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                            }
                          }
                          if (bn->requires_grad) {
                            auto& gb = detail::scratch_grad(s, bn);
                            if (bsc) {
                              gb[0] -= sum_of(g);
                            } else {
                              for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                            }
                          }
                        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const BroadcastPlan plan = resolve_elementwise(a, b, "mul");
  const auto& av = a.data();
  const auto& bv = b.data();
  const int64_t n = plan.out.size();
  std::vector<double> out(n);
  const bool asc = plan.a_scalar;
  const bool bsc = plan.b_scalar;
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = av[asc ? 0 : i] * bv[bsc ? 0 : i];
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  std::vector<double> a_saved = av;
  std::vector<double> b_saved = bv;
  return make_op_result(
      plan.out, std::move(out), {a, b},
      [an, bn, asc, bsc, a_saved = std::move(a_saved),
       b_saved = std::move(b_saved)](const std::vector<double>& g, GradMap& s) {
        if (an->requires_grad) {
          auto& ga = detail::scratch_grad(s, an);
          if (asc) {
            double t = 0.0;
            for (size_t i = 0; i < g.size(); ++i) t += g[i] * b_saved[bsc ? 0 : i];
            ga[0] += t;
          } else {
            for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b_saved[bsc ? 0 : i];
          }
        }
        if (bn->requires_grad) {
          auto& gb = detail::scratch_grad(s, bn);
          if (bsc) {
            double t = 0.0;
            for (size_t i = 0; i < g.size(); ++i) t += g[i] * a_saved[asc ? 0 : i];
            gb[0] += t;
          } else {
            for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a_saved[asc ? 0 : i];
          }
        }
      });
}

Tensor add_scalar(const Tensor& a, double sc) {
  check_defined(a, "add_scalar");
  const auto& av = a.data();
  const int64_t n = a.size();
  std::vector<double> out(n);
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = av[i] + sc;
  TensorNode* an = a.node();
  return make_op_result(a.shape(), std::move(out), {a},
                        [an](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                        });
}

Tensor mul_scalar(const Tensor& a, double sc) {
  check_defined(a, "mul_scalar");
  const auto& av = a.data();
  const int64_t n = a.size();
  std::vector<double> out(n);
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = av[i] * sc;
  TensorNode* an = a.node();
  return make_op_result(a.shape(), std::move(out), {a},
                        [an, sc](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * sc;
                        });
}

Tensor div_scalar(const Tensor& a, double sc) {
  check_defined(a, "div_scalar");
  if (sc == 0.0) throw std::invalid_argument("div_scalar: division by zero");
  const auto& av = a.data();
  const int64_t n = a.size();
  std::vector<double> out(n);
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = av[i] / sc;
  TensorNode* an = a.node();
  return make_op_result(a.shape(), std::move(out), {a},
                        [an, sc](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / sc;
                        });
}

Tensor neg(const Tensor& a) {
  check_defined(a, "neg");
  const auto& av = a.data();
  const int64_t n = a.size();
  std::vector<double> out(n);
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = -av[i];
  TensorNode* an = a.node();
  return make_op_result(a.shape(), std::move(out), {a},
                        [an](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          for (size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
                        });
}

Tensor exp(const Tensor& a) {
  check_defined(a, "exp");
  const auto& av = a.data();
  const int64_t n = a.size();
  std::vector<double> out(n);
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = std::exp(av[i]);
  TensorNode* an = a.node();
  std::vector<double> saved = out;
  return make_op_result(a.shape(), std::move(out), {a},
                        [an, saved = std::move(saved)](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * saved[i];
                        });
}

Tensor log(const Tensor& a) {
  check_defined(a, "log");
  const auto& av = a.data();
  const int64_t n = a.size();
  const int64_t cols = a.cols();
  std::vector<double> out(n);
  for (int64_t i = 0; i < n; ++i) {
    if (!(av[i] > 0.0)) {
      throw std::domain_error("log: non-positive input " + format_norm(av[i]) + " at (" +
                              std::to_string(i / cols) + ", " + std::to_string(i % cols) + ")");
    }
    out[i] = std::log(av[i]);
  }
  TensorNode* an = a.node();
  std::vector<double> saved = av;
  return make_op_result(a.shape(), std::move(out), {a},
                        [an, saved = std::move(saved)](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / saved[i];
                        });
}

Tensor relu(const Tensor& a) {
  check_defined(a, "relu");
  const auto& av = a.data();
  const int64_t n = a.size();
  std::vector<double> out(n);
#pragma omp parallel for schedule(static) if (n >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  TensorNode* an = a.node();
  std::vector<double> saved = av;
  return make_op_result(a.shape(), std::move(out), {a},
                        [an, saved = std::move(saved)](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          for (size_t i = 0; i < g.size(); ++i) {
                            if (saved[i] > 0.0) ga[i] += g[i];
                          }
                        });
}

Tensor sum(const Tensor& a) {
  check_defined(a, "sum");
  const double total = sum_of(a.data());
  TensorNode* an = a.node();
  return make_op_result({1, 1}, {total}, {a},
                        [an](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
                        });
}

Tensor mean(const Tensor& a) {
  check_defined(a, "mean");
  const int64_t n = a.size();
  const double total = sum_of(a.data());
  TensorNode* an = a.node();
  return make_op_result({1, 1}, {total / static_cast<double>(n)}, {a},
                        [an, n](const std::vector<double>& g, GradMap& s) {
                          if (!an->requires_grad) return;
                          auto& ga = detail::scratch_grad(s, an);
                          const double gi = g[0] / static_cast<double>(n);
                          for (size_t i = 0; i < ga.size(); ++i) ga[i] += gi;
                        });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.cols != sb.rows) {
    throw std::invalid_argument("matmul: inner dimensions differ (" + sa.str() + " vs " +
                                sb.str() + ")");
  }
  const int64_t n = sa.rows, k = sa.cols, m = sb.cols;
  std::vector<double> out(n * m);
  kernels::gemm(false, false, n, m, k, a.data().data(), b.data().data(), out.data());
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  std::vector<double> a_saved = a.data();
  std::vector<double> b_saved = b.data();
  return make_op_result(
      {n, m}, std::move(out), {a, b},
      [an, bn, n, k, m, a_saved = std::move(a_saved),
       b_saved = std::move(b_saved)](const std::vector<double>& g, GradMap& s) {
        if (an->requires_grad) {
          auto& ga = detail::scratch_grad(s, an);
          kernels::gemm(false, true, n, k, m, g.data(), b_saved.data(), ga.data(), true);
        }
        if (bn->requires_grad) {
          auto& gb = detail::scratch_grad(s, bn);
          kernels::gemm(true, false, k, m, n, a_saved.data(), g.data(), gb.data(), true);
        }
      });
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul_transposed");
  check_defined(b, "matmul_transposed");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.cols != sb.cols) {
    throw std::invalid_argument("matmul_transposed: inner dimensions differ (" + sa.str() +
                                " vs " + sb.str() + ")");
  }
  const int64_t n = sa.rows, d = sa.cols, m = sb.rows;
  std::vector<double> out(n * m);
  kernels::gemm(false, true, n, m, d, a.data().data(), b.data().data(), out.data());
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  std::vector<double> a_saved = a.data();
  std::vector<double> b_saved = b.data();
  return make_op_result(
      {n, m}, std::move(out), {a, b},
      [an, bn, n, d, m, a_saved = std::move(a_saved),
       b_saved = std::move(b_saved)](const std::vector<double>& g, GradMap& s) {
        if (an->requires_grad) {
          auto& ga = detail::scratch_grad(s, an);
          kernels::gemm(false, false, n, d, m, g.data(), b_saved.data(), ga.data(), true);
        }
        if (bn->requires_grad) {
          auto& gb = detail::scratch_grad(s, bn);
          kernels::gemm(true, false, m, d, n, g.data(), a_saved.data(), gb.data(), true);
        }
      });
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& row) {
  check_defined(x, "add_row_broadcast");
  check_defined(row, "add_row_broadcast");
  const Shape& sx = x.shape();
  const Shape& sr = row.shape();
  if (sr.rows != 1 || sr.cols != sx.cols) {
    throw std::invalid_argument("add_row_broadcast: row shape " + sr.str() +
                                " does not broadcast over " + sx.str());
  }
  const int64_t n = sx.rows, m = sx.cols;
  const auto& xv = x.data();
  const auto& rv = row.data();
  std::vector<double> out(n * m);
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < m; ++j) out[i * m + j] = xv[i * m + j] + rv[j];
  }
  TensorNode* xn = x.node();
  TensorNode* rn = row.node();
  return make_op_result({n, m}, std::move(out), {x, row},
                        [xn, rn, n, m](const std::vector<double>& g, GradMap& s) {
                          if (xn->requires_grad) {
                            auto& gx = detail::scratch_grad(s, xn);
                            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                          if (rn->requires_grad) {
                            auto& gr = detail::scratch_grad(s, rn);
                            for (int64_t j = 0; j < m; ++j) {
                              double t = 0.0;
                              for (int64_t i = 0; i < n; ++i) t += g[i * m + j];
                              gr[j] += t;
                            }
                          }
                        });
}

Tensor rows_dot(const Tensor& a, const Tensor& b) {
  check_defined(a, "rows_dot");
  check_defined(b, "rows_dot");
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("rows_dot: shapes " + a.shape().str() + " and " +
                                b.shape().str() + " differ");
  }
  const int64_t n = a.rows(), d = a.cols();
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(n);
#pragma omp parallel for schedule(static) if (n * d >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) {
    double t = 0.0;
    for (int64_t j = 0; j < d; ++j) t += av[i * d + j] * bv[i * d + j];
    out[i] = t;
  }
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  std::vector<double> a_saved = av;
  std::vector<double> b_saved = bv;
  return make_op_result(
      {n, 1}, std::move(out), {a, b},
      [an, bn, n, d, a_saved = std::move(a_saved),
       b_saved = std::move(b_saved)](const std::vector<double>& g, GradMap& s) {
        if (an->requires_grad) {
          auto& ga = detail::scratch_grad(s, an);
          for (int64_t i = 0; i < n; ++i) {
            for (int64_t j = 0; j < d; ++j) ga[i * d + j] += g[i] * b_saved[i * d + j];
          }
        }
        if (bn->requires_grad) {
          auto& gb = detail::scratch_grad(s, bn);
          for (int64_t i = 0; i < n; ++i) {
            for (int64_t j = 0; j < d; ++j) gb[i * d + j] += g[i] * a_saved[i * d + j];
          }
        }
      });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check_defined(a, "concat_cols");
  check_defined(b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("concat_cols: row counts differ (" + a.shape().str() + " vs " +
                                b.shape().str() + ")");
  }
  const int64_t n = a.rows(), ca = a.cols(), cb = b.cols(), m = ca + cb;
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> out(n * m);
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < ca; ++j) out[i * m + j] = av[i * ca + j];
    for (int64_t j = 0; j < cb; ++j) out[i * m + ca + j] = bv[i * cb + j];
  }
  TensorNode* an = a.node();
  TensorNode* bn = b.node();
  return make_op_result({n, m}, std::move(out), {a, b},
                        [an, bn, n, ca, cb, m](const std::vector<double>& g, GradMap& s) {
                          if (an->requires_grad) {
                            auto& ga = detail::scratch_grad(s, an);
                            for (int64_t i = 0; i < n; ++i) {
                              for (int64_t j = 0; j < ca; ++j) ga[i * ca + j] += g[i * m + j];
                            }
                          }
                          if (bn->requires_grad) {
                            auto& gb = detail::scratch_grad(s, bn);
                            for (int64_t i = 0; i < n; ++i) {
                              for (int64_t j = 0; j < cb; ++j) gb[i * cb + j] += g[i * m + ca + j];
                            }
                          }
                        });
}

Tensor row_l2_normalize(const Tensor& x) {
  check_defined(x, "row_l2_normalize");
  const int64_t n = x.rows(), d = x.cols();
  const auto& xv = x.data();
  std::vector<double> norms(n);
  kernels::row_norms(xv.data(), norms.data(), n, d);
  for (int64_t i = 0; i < n; ++i) {
    if (norms[i] < 1e-12) {
      throw std::domain_error("row_l2_normalize: row " + std::to_string(i) +
                              " has norm " + format_norm(norms[i]) + " (degenerate input)");
    }
  }
  std::vector<double> inv(n);
  for (int64_t i = 0; i < n; ++i) inv[i] = 1.0 / norms[i];
  std::vector<double> out(n * d);
  kernels::scale_rows(xv.data(), inv.data(), out.data(), n, d);
  TensorNode* xn = x.node();
  std::vector<double> y_saved = out;
  return make_op_result(
      {n, d}, std::move(out), {x},
      [xn, n, d, inv = std::move(inv),
       y_saved = std::move(y_saved)](const std::vector<double>& g, GradMap& s) {
        if (!xn->requires_grad) return;
        auto& gx = detail::scratch_grad(s, xn);
#pragma omp parallel for schedule(static) if (n * d >= kParallelGrain)
        for (int64_t i = 0; i < n; ++i) {
          const double* gr = g.data() + i * d;
          const double* yr = y_saved.data() + i * d;
          double dot = 0.0;
          for (int64_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
          for (int64_t j = 0; j < d; ++j) gx[i * d + j] += (gr[j] - yr[j] * dot) * inv[i];
        }
      });
}

Tensor softmax_rows(const Tensor& x, double temperature) {
  check_defined(x, "softmax_rows");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("softmax_rows: temperature must be positive, got " +
                                format_norm(temperature));
  }
  const int64_t n = x.rows(), m = x.cols();
  std::vector<double> out(n * m);
  kernels::softmax_rows(x.data().data(), out.data(), n, m, temperature);
  TensorNode* xn = x.node();
  std::vector<double> y_saved = out;
  return make_op_result(
      {n, m}, std::move(out), {x},
      [xn, n, m, temperature, y_saved = std::move(y_saved)](const std::vector<double>& g,
                                                            GradMap& s) {
        if (!xn->requires_grad) return;
        auto& gx = detail::scratch_grad(s, xn);
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
        for (int64_t i = 0; i < n; ++i) {
          const double* gr = g.data() + i * m;
          const double* yr = y_saved.data() + i * m;
          double dot = 0.0;
          for (int64_t j = 0; j < m; ++j) dot += gr[j] * yr[j];
          for (int64_t j = 0; j < m; ++j) gx[i * m + j] += yr[j] * (gr[j] - dot) / temperature;
        }
      });
}

Tensor log_softmax_rows(const Tensor& x, double temperature) {
  check_defined(x, "log_softmax_rows");
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("log_softmax_rows: temperature must be positive, got " +
                                format_norm(temperature));
  }
  const int64_t n = x.rows(), m = x.cols();
  std::vector<double> out(n * m);
  kernels::log_softmax_rows(x.data().data(), out.data(), n, m, temperature);
  TensorNode* xn = x.node();
  std::vector<double> y_saved = out;
  return make_op_result(
      {n, m}, std::move(out), {x},
      [xn, n, m, temperature, y_saved = std::move(y_saved)](const std::vector<double>& g,
                                                            GradMap& s) {
        if (!xn->requires_grad) return;
        auto& gx = detail::scratch_grad(s, xn);
#pragma omp parallel for schedule(static) if (n * m >= kParallelGrain)
        for (int64_t i = 0; i < n; ++i) {
          const double* gr = g.data() + i * m;
          const double* yr = y_saved.data() + i * m;
          double gsum = 0.0;
          for (int64_t j = 0; j < m; ++j) gsum += gr[j];
          for (int64_t j = 0; j < m; ++j) {
            gx[i * m + j] += (gr[j] - std::exp(yr[j]) * gsum) / temperature;
          }
        }
      });
}

}  // namespace rrd
