// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace rrd::kernels {

// Element-count threshold below which the OpenMP kernels stay serial; spawning
// a team costs more than the loop for tiny tensors.
inline constexpr int64_t kParallelGrain = 4096;

// C[m x n] = A . B (+= when accumulate). trans_a / trans_b describe the stored
// layout: with trans_a the buffer holds A^T as [k x m], likewise trans_b means
// the buffer holds B^T as [n x k]. Row-major throughout.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          const double* a, const double* b, double* c, bool accumulate = false);

// Per-row softmax of x / temperature with max-subtraction. x and y are [rows x cols].
void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols, double temperature);

// Per-row log-softmax of x / temperature with max-subtraction.
void log_softmax_rows(const double* x, double* y, int64_t rows, int64_t cols, double temperature);

// Euclidean norm of each row.
void row_norms(const double* x, double* norms, int64_t rows, int64_t cols);

// y[i, :] = x[i, :] * factors[i]
void scale_rows(const double* x, const double* factors, double* y, int64_t rows, int64_t cols);

// Serial reference implementations. Same contracts, same floating-point
// evaluation order, no OpenMP. The parallel kernels above assign each output
// element to exactly one thread and keep inner reductions serial, so the two
// families must agree bit for bit; the tests assert that.
namespace ref {

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          const double* a, const double* b, double* c, bool accumulate = false);
void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols, double temperature);
void log_softmax_rows(const double* x, double* y, int64_t rows, int64_t cols, double temperature);
void row_norms(const double* x, double* norms, int64_t rows, int64_t cols);
void scale_rows(const double* x, const double* factors, double* y, int64_t rows, int64_t cols);

}  // namespace ref

}  // namespace rrd::kernels
