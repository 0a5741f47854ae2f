// SPDX-License-Identifier: Apache-2.0
#include "rrd/kernels.hpp"

#include <cmath>

namespace rrd::kernels {

namespace {

// One implementation per kernel; the bool selects whether the row loop may be
// parallelized. The per-element arithmetic is identical either way, which is
// what makes ref:: and the OpenMP entry points bit-identical.
void gemm_impl(bool parallel, bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
               const double* a, const double* b, double* c, bool accumulate) {
  const bool par = parallel && m * n * k >= kParallelGrain;
  if (!trans_a && !trans_b) {
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      if (!accumulate) {
        for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
      }
      for (int64_t l = 0; l < k; ++l) {
        const double av = a[i * k + l];
        const double* brow = b + l * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < m; ++i) {
      const double* arow = a + i * k;
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const double* brow = b + j * k;
        double s = 0.0;
        for (int64_t l = 0; l < k; ++l) s += arow[l] * brow[l];
        crow[j] = accumulate ? crow[j] + s : s;
      }
    }
  } else if (trans_a && !trans_b) {
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      if (!accumulate) {
        for (int64_t j = 0; j < n; ++j) crow[j] = 0.0;
      }
      for (int64_t l = 0; l < k; ++l) {
        const double av = a[l * m + i];
        const double* brow = b + l * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
#pragma omp parallel for schedule(static) if (par)
    for (int64_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (int64_t l = 0; l < k; ++l) s += a[l * m + i] * b[j * k + l];
        crow[j] = accumulate ? crow[j] + s : s;
      }
    }
  }
}

void softmax_rows_impl(bool parallel, const double* x, double* y, int64_t rows, int64_t cols,
                       double temperature) {
  const bool par = parallel && rows * cols >= kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < rows; ++i) {
    const double* xr = x + i * cols;
    double* yr = y + i * cols;
    double mx = xr[0];
    for (int64_t j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
    double sum = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      yr[j] = std::exp((xr[j] - mx) / temperature);
      sum += yr[j];
    }
    const double inv = 1.0 / sum;
    for (int64_t j = 0; j < cols; ++j) yr[j] *= inv;
  }
}

void log_softmax_rows_impl(bool parallel, const double* x, double* y, int64_t rows, int64_t cols,
                           double temperature) {
  const bool par = parallel && rows * cols >= kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < rows; ++i) {
    const double* xr = x + i * cols;
    double* yr = y + i * cols;
    double mx = xr[0];
    for (int64_t j = 1; j < cols; ++j) mx = xr[j] > mx ? xr[j] : mx;
    double sum = 0.0;
    for (int64_t j = 0; j < cols; ++j) sum += std::exp((xr[j] - mx) / temperature);
    const double lse = std::log(sum);
    for (int64_t j = 0; j < cols; ++j) yr[j] = (xr[j] - mx) / temperature - lse;
  }
}

void row_norms_impl(bool parallel, const double* x, double* norms, int64_t rows, int64_t cols) {
  const bool par = parallel && rows * cols >= kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < rows; ++i) {
    const double* xr = x + i * cols;
    double s = 0.0;
    for (int64_t j = 0; j < cols; ++j) s += xr[j] * xr[j];
    norms[i] = std::sqrt(s);
  }
}

void scale_rows_impl(bool parallel, const double* x, const double* factors, double* y,
                     int64_t rows, int64_t cols) {
  const bool par = parallel && rows * cols >= kParallelGrain;
#pragma omp parallel for schedule(static) if (par)
  for (int64_t i = 0; i < rows; ++i) {
    const double f = factors[i];
    const double* xr = x + i * cols;
    double* yr = y + i * cols;
    for (int64_t j = 0; j < cols; ++j) yr[j] = xr[j] * f;
  }
}

}  // namespace

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  gemm_impl(true, trans_a, trans_b, m, n, k, a, b, c, accumulate);
}

void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols, double temperature) {
  softmax_rows_impl(true, x, y, rows, cols, temperature);
}

void log_softmax_rows(const double* x, double* y, int64_t rows, int64_t cols, double temperature) {
  log_softmax_rows_impl(true, x, y, rows, cols, temperature);
}

void row_norms(const double* x, double* norms, int64_t rows, int64_t cols) {
  row_norms_impl(true, x, norms, rows, cols);
}

void scale_rows(const double* x, const double* factors, double* y, int64_t rows, int64_t cols) {
  scale_rows_impl(true, x, factors, y, rows, cols);
}

namespace ref {

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  gemm_impl(false, trans_a, trans_b, m, n, k, a, b, c, accumulate);
}

void softmax_rows(const double* x, double* y, int64_t rows, int64_t cols, double temperature) {
  softmax_rows_impl(false, x, y, rows, cols, temperature);
}

void log_softmax_rows(const double* x, double* y, int64_t rows, int64_t cols, double temperature) {
  log_softmax_rows_impl(false, x, y, rows, cols, temperature);
}

void row_norms(const double* x, double* norms, int64_t rows, int64_t cols) {
  row_norms_impl(false, x, norms, rows, cols);
}

void scale_rows(const double* x, const double* factors, double* y, int64_t rows, int64_t cols) {
  scale_rows_impl(false, x, factors, y, rows, cols);
}

}  // namespace ref

}  // namespace rrd::kernels
