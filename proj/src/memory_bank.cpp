// SPDX-License-Identifier: Apache-2.0
#include "rrd/memory_bank.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "rrd/rng.hpp"

namespace rrd {

namespace {

// Inputs handed to the bank must already be normalized; this guards against
// callers skipping the projection head's normalization.
constexpr double kUnitNormTolerance = 1e-6;

// Row norms below this are degenerate (nothing meaningful to renormalize).
constexpr double kDegenerateNorm = 1e-12;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3e", v);
  return buf;
}

}  // namespace

MemoryBank::MemoryBank(int64_t capacity, int64_t dim, BankStrategy strategy, uint64_t seed,
                       double momentum_alpha) {
  if (capacity < 1) {
    throw std::invalid_argument("memory bank capacity must be positive, got " +
                                std::to_string(capacity));
  }
  if (dim < 1) {
    throw std::invalid_argument("memory bank dim must be positive, got " + std::to_string(dim));
  }
  if (!(momentum_alpha > 0.0 && momentum_alpha < 1.0)) {
    throw std::invalid_argument("memory bank momentum_alpha must be in (0, 1), got " +
                                fmt(momentum_alpha));
  }
  capacity_ = capacity;
  dim_ = dim;
  strategy_ = strategy;
  alpha_ = momentum_alpha;
  data_.resize(capacity * dim);
  Rng rng(seed);
  for (int64_t r = 0; r < capacity_; ++r) {
    double* row = data_.data() + r * dim_;
    double norm = 0.0;
    do {
      norm = 0.0;
      for (int64_t j = 0; j < dim_; ++j) {
        row[j] = rng.next_gaussian();
        norm += row[j] * row[j];
      }
      norm = std::sqrt(norm);
    } while (norm < kDegenerateNorm);
    for (int64_t j = 0; j < dim_; ++j) row[j] /= norm;
  }
}

MemoryBank MemoryBank::from_storage(int64_t capacity, int64_t dim, BankStrategy strategy,
                                    double momentum_alpha, std::vector<double> storage,
                                    int64_t cursor) {
  if (capacity < 1 || dim < 1) {
    throw std::invalid_argument("memory bank dimensions must be positive, got capacity=" +
                                std::to_string(capacity) + " dim=" + std::to_string(dim));
  }
  if (static_cast<int64_t>(storage.size()) != capacity * dim) {
    throw std::invalid_argument("memory bank storage length " + std::to_string(storage.size()) +
                                " does not match capacity " + std::to_string(capacity) + " x dim " +
                                std::to_string(dim));
  }
  if (cursor < 0 || cursor >= capacity) {
    throw std::invalid_argument("memory bank cursor " + std::to_string(cursor) +
                                " out of range for capacity " + std::to_string(capacity));
  }
  if (!(momentum_alpha > 0.0 && momentum_alpha < 1.0)) {
    throw std::invalid_argument("memory bank momentum_alpha must be in (0, 1), got " +
                                fmt(momentum_alpha));
  }
  MemoryBank bank;
  bank.capacity_ = capacity;
  bank.dim_ = dim;
  bank.strategy_ = strategy;
  bank.alpha_ = momentum_alpha;
  bank.cursor_ = cursor;
  bank.data_ = std::move(storage);
  return bank;
}

void MemoryBank::validate_rows(const Tensor& t, const char* op, bool match_dim) const {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": tensor is not defined");
  if (match_dim && t.cols() != dim_) {
    throw std::invalid_argument(std::string(op) + ": feature dimension " +
                                std::to_string(t.cols()) + " does not match bank dim " +
                                std::to_string(dim_));
  }
  const auto& v = t.data();
  const int64_t n = t.rows(), d = t.cols();
  for (int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += v[i * d + j] * v[i * d + j];
    const double norm = std::sqrt(s);
    if (std::fabs(norm - 1.0) > kUnitNormTolerance) {
      throw std::invalid_argument(std::string(op) + ": row " + std::to_string(i) +
                                  " has norm " + fmt(norm) + ", expected unit norm");
    }
  }
}

void MemoryBank::enqueue_batch(const Tensor& features) {
  if (strategy_ != BankStrategy::kFifo) {
    throw std::logic_error("enqueue_batch is only valid for the fifo strategy");
  }
  validate_rows(features, "enqueue_batch");
  const int64_t n = features.rows();
  if (n > capacity_) {
    throw std::invalid_argument("enqueue_batch: batch of " + std::to_string(n) +
                                " exceeds bank capacity " + std::to_string(capacity_));
  }
  const auto& v = features.data();
  for (int64_t i = 0; i < n; ++i) {
    double* row = data_.data() + cursor_ * dim_;
    for (int64_t j = 0; j < dim_; ++j) row[j] = v[i * dim_ + j];
    cursor_ = (cursor_ + 1) % capacity_;
  }
}

void MemoryBank::momentum_update(const std::vector<int64_t>& slots, const Tensor& features) {
  if (strategy_ != BankStrategy::kMomentum) {
    throw std::logic_error("momentum_update is only valid for the momentum strategy");
  }
  validate_rows(features, "momentum_update");
  if (static_cast<int64_t>(slots.size()) != features.rows()) {
    throw std::invalid_argument("momentum_update: " + std::to_string(slots.size()) +
                                " slots for " + std::to_string(features.rows()) + " feature rows");
  }
  const auto& v = features.data();
  for (size_t i = 0; i < slots.size(); ++i) {
    const int64_t slot = slots[i];
    if (slot < 0 || slot >= capacity_) {
      throw std::invalid_argument("momentum_update: slot " + std::to_string(slot) +
                                  " out of range for capacity " + std::to_string(capacity_));
    }
    double* row = data_.data() + slot * dim_;
    double norm = 0.0;
    for (int64_t j = 0; j < dim_; ++j) {
      row[j] = alpha_ * row[j] + (1.0 - alpha_) * v[i * dim_ + j];
      norm += row[j] * row[j];
    }
    norm = std::sqrt(norm);
    if (norm < kDegenerateNorm) {
      throw std::domain_error("momentum_update: slot " + std::to_string(slot) +
                              " collapsed to norm " + fmt(norm));
    }
    for (int64_t j = 0; j < dim_; ++j) row[j] /= norm;
  }
}

Tensor MemoryBank::similarities(const Tensor& queries) const {
  validate_rows(queries, "similarities");
  return matmul_transposed(queries, as_tensor());
}

Tensor MemoryBank::extended_similarities(const Tensor& queries, const Tensor& appended) const {
  validate_rows(queries, "extended_similarities");
  validate_rows(appended, "extended_similarities");
  if (appended.rows() != queries.rows()) {
    throw std::invalid_argument("extended_similarities: appended rows " +
                                std::to_string(appended.rows()) + " do not match queries " +
                                std::to_string(queries.rows()));
  }
  return concat_cols(matmul_transposed(queries, as_tensor()), rows_dot(queries, appended));
}

Tensor MemoryBank::as_tensor() const {
  return Tensor::from_data({capacity_, dim_}, data_);
}

}  // namespace rrd
