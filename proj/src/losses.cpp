// SPDX-License-Identifier: Apache-2.0
#include "rrd/losses.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "rrd/kernels.hpp"

namespace rrd {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

void check_temperature(double tau, const char* op) {
  if (!(tau > 0.0)) {
    throw std::invalid_argument(std::string(op) + ": temperature must be positive, got " +
                                fmt(tau));
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.defined() || !b.defined()) {
    throw std::invalid_argument(std::string(op) + ": tensor is not defined");
  }
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shapes " + a.shape().str() + " and " +
                                b.shape().str() + " differ");
  }
}

void check_probability_rows(const Tensor& p, const char* op) {
  const auto& v = p.data();
  for (size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) {
      throw std::domain_error(std::string(op) + ": negative probability " + fmt(v[i]));
    }
  }
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_kd < 0.0) {
    throw std::invalid_argument("loss weight lambda_kd must be non-negative, got " +
                                fmt(lambda_kd));
  }
  if (beta_rrd < 0.0) {
    throw std::invalid_argument("loss weight beta_rrd must be non-negative, got " + fmt(beta_rrd));
  }
  check_temperature(tau_kd, "loss tau_kd");
  check_temperature(tau_student, "loss tau_student");
  check_temperature(tau_teacher, "loss tau_teacher");
}

Tensor similarity_distribution(const Tensor& raw_similarities, double temperature) {
  check_temperature(temperature, "similarity_distribution");
  return softmax_rows(raw_similarities, temperature);
}

Tensor rrd_loss(const Tensor& student_embedding, const Tensor& teacher_embedding,
                const MemoryBank& bank, double tau_student, double tau_teacher, RrdMode mode) {
  check_temperature(tau_student, "rrd_loss tau_student");
  check_temperature(tau_teacher, "rrd_loss tau_teacher");
  check_same_shape(student_embedding, teacher_embedding, "rrd_loss");
  const int64_t n = student_embedding.rows();

  // The teacher side is a training target, never a gradient path.
  const Tensor teacher = teacher_embedding.detach();

  Tensor student_sims, teacher_sims;
  if (mode == RrdMode::kAppend) {
    student_sims = bank.extended_similarities(student_embedding, teacher);
    teacher_sims = bank.extended_similarities(teacher, teacher);
  } else {
    student_sims = bank.similarities(student_embedding);
    teacher_sims = bank.similarities(teacher);
  }

  Tensor target = softmax_rows(teacher_sims, tau_teacher);
  Tensor student_logp = log_softmax_rows(student_sims, tau_student);
  return mul_scalar(sum(mul(target, student_logp)), -1.0 / static_cast<double>(n));
}

Tensor infonce_loss(const Tensor& student_embedding, const Tensor& teacher_embedding,
                    const MemoryBank& bank, double tau) {
  check_temperature(tau, "infonce_loss");
  check_same_shape(student_embedding, teacher_embedding, "infonce_loss");
  const int64_t n = student_embedding.rows();
  const int64_t k = bank.capacity();

  const Tensor teacher = teacher_embedding.detach();
  Tensor extended = bank.extended_similarities(student_embedding, teacher);
  Tensor logp = log_softmax_rows(extended, tau);

  // The positive for each row is the appended column.
  std::vector<double> mask(n * (k + 1), 0.0);
  for (int64_t i = 0; i < n; ++i) mask[i * (k + 1) + k] = 1.0;
  Tensor positive = Tensor::from_data({n, k + 1}, std::move(mask));
  return mul_scalar(sum(mul(positive, logp)), -1.0 / static_cast<double>(n));
}

Tensor kd_kl_loss(const Tensor& student_logits, const Tensor& teacher_logits, double tau) {
  check_temperature(tau, "kd_kl_loss");
  check_same_shape(student_logits, teacher_logits, "kd_kl_loss");
  const int64_t n = student_logits.rows();
  const int64_t c = student_logits.cols();

  // Teacher distributions are computed outside the graph (stop-gradient).
  std::vector<double> teacher_probs(n * c), teacher_logp(n * c);
  kernels::softmax_rows(teacher_logits.data().data(), teacher_probs.data(), n, c, tau);
  kernels::log_softmax_rows(teacher_logits.data().data(), teacher_logp.data(), n, c, tau);
  double teacher_self = 0.0;
  for (int64_t i = 0; i < n * c; ++i) teacher_self += teacher_probs[i] * teacher_logp[i];

  Tensor target = Tensor::from_data({n, c}, std::move(teacher_probs));
  Tensor student_logp = log_softmax_rows(student_logits, tau);
  Tensor cross = sum(mul(target, student_logp));

  // KL = sum p_t log p_t - sum p_t log p_s; when the logits coincide the two
  // terms are the same double, so the result cancels to exactly zero.
  const double scale = tau * tau / static_cast<double>(n);
  return add_scalar(mul_scalar(cross, -scale), teacher_self * scale);
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (!logits.defined()) throw std::invalid_argument("cross_entropy_loss: logits not defined");
  const int64_t n = logits.rows();
  const int64_t c = logits.cols();
  if (static_cast<int64_t>(labels.size()) != n) {
    throw std::invalid_argument("cross_entropy_loss: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " logit rows");
  }
  std::vector<double> mask(n * c, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw std::invalid_argument("cross_entropy_loss: label " + std::to_string(labels[i]) +
                                  " at row " + std::to_string(i) + " out of range for " +
                                  std::to_string(c) + " classes");
    }
    mask[i * c + labels[i]] = 1.0;
  }
  Tensor onehot = Tensor::from_data({n, c}, std::move(mask));
  Tensor logp = log_softmax_rows(logits, 1.0);
  return mul_scalar(sum(mul(onehot, logp)), -1.0 / static_cast<double>(n));
}

Tensor combined_objective(const Tensor& supervised, const Tensor& kd, const Tensor& rrd,
                          double lambda_kd, double beta_rrd) {
  if (lambda_kd < 0.0 || beta_rrd < 0.0) {
    throw std::invalid_argument("combined_objective: weights must be non-negative, got lambda=" +
                                fmt(lambda_kd) + " beta=" + fmt(beta_rrd));
  }
  for (const Tensor* t : {&supervised, &kd, &rrd}) {
    if (!t->defined() || t->shape() != Shape{1, 1}) {
      throw std::invalid_argument("combined_objective: all loss terms must be scalars");
    }
  }
  return add(add(supervised, mul_scalar(kd, lambda_kd)), mul_scalar(rrd, beta_rrd));
}

std::vector<double> row_entropy(const Tensor& p) {
  check_probability_rows(p, "row_entropy");
  const int64_t n = p.rows(), c = p.cols();
  const auto& v = p.data();
  std::vector<double> out(n, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double h = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double pj = v[i * c + j];
      if (pj > 0.0) h -= pj * std::log(pj);
    }
    out[i] = h;
  }
  return out;
}

std::vector<double> row_cross_entropy(const Tensor& p, const Tensor& q) {
  check_same_shape(p, q, "row_cross_entropy");
  check_probability_rows(p, "row_cross_entropy");
  const int64_t n = p.rows(), c = p.cols();
  const auto& pv = p.data();
  const auto& qv = q.data();
  std::vector<double> out(n, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double h = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double pj = pv[i * c + j];
      if (pj <= 0.0) continue;
      const double qj = qv[i * c + j];
      if (!(qj > 0.0)) {
        throw std::domain_error("row_cross_entropy: zero probability at (" + std::to_string(i) +
                                ", " + std::to_string(j) + ") where the reference is positive");
      }
      h -= pj * std::log(qj);
    }
    out[i] = h;
  }
  return out;
}

std::vector<double> row_kl_divergence(const Tensor& p, const Tensor& q) {
  check_same_shape(p, q, "row_kl_divergence");
  check_probability_rows(p, "row_kl_divergence");
  const int64_t n = p.rows(), c = p.cols();
  const auto& pv = p.data();
  const auto& qv = q.data();
  std::vector<double> out(n, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    double kl = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double pj = pv[i * c + j];
      if (pj <= 0.0) continue;
      const double qj = qv[i * c + j];
      if (!(qj > 0.0)) {
        throw std::domain_error("row_kl_divergence: zero probability at (" + std::to_string(i) +
                                ", " + std::to_string(j) + ") where the reference is positive");
      }
      kl += pj * (std::log(pj) - std::log(qj));
    }
    out[i] = kl;
  }
  return out;
}

}  // namespace rrd
