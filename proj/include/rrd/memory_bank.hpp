// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "rrd/tensor.hpp"

namespace rrd {

enum class BankStrategy { kFifo, kMomentum };

// Fixed-capacity store of unit-norm feature rows used as the relation anchor
// set. Contents are plain values: similarity tensors built from the bank are
// constants in the graph, so no gradient can ever reach the stored rows.
class MemoryBank {
 public:
  // Rows start as random unit vectors drawn from `seed`.
  MemoryBank(int64_t capacity, int64_t dim, BankStrategy strategy, uint64_t seed,
             double momentum_alpha = 0.999);

  // Rebuilds a bank from serialized state (checkpoint restore).
  static MemoryBank from_storage(int64_t capacity, int64_t dim, BankStrategy strategy,
                                 double momentum_alpha, std::vector<double> storage,
                                 int64_t cursor);

  int64_t capacity() const { return capacity_; }
  int64_t dim() const { return dim_; }
  BankStrategy strategy() const { return strategy_; }
  double momentum_alpha() const { return alpha_; }
  // Next FIFO write position.
  int64_t cursor() const { return cursor_; }
  const std::vector<double>& storage() const { return data_; }

  // FIFO strategy only: overwrites the oldest rows with the given features,
  // advancing the circular cursor. The batch may not exceed capacity.
  void enqueue_batch(const Tensor& features);

  // Momentum strategy only: rows[slots[i]] <- alpha * row + (1 - alpha) * features[i],
  // re-normalized. Pairs are applied in order, so repeated slots compound.
  void momentum_update(const std::vector<int64_t>& slots, const Tensor& features);

  // [n x capacity] dot products of unit-norm query rows against every stored row.
  Tensor similarities(const Tensor& queries) const;

  // similarities(queries) with one extra column: the per-row dot product
  // against `appended` (each query's own positive). [n x (capacity + 1)]
  Tensor extended_similarities(const Tensor& queries, const Tensor& appended) const;

  // Copy of the contents as a [capacity x dim] constant tensor.
  Tensor as_tensor() const;

 private:
  MemoryBank() = default;
  void validate_rows(const Tensor& t, const char* op, bool match_dim = true) const;

  int64_t capacity_{0};
  int64_t dim_{0};
  BankStrategy strategy_{BankStrategy::kFifo};
  double alpha_{0.999};
  int64_t cursor_{0};
  std::vector<double> data_;
};

}  // namespace rrd
