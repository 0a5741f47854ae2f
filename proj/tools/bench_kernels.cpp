// SPDX-License-Identifier: Apache-2.0
// Times the OpenMP kernels against their serial reference twins and verifies
// the outputs stay bit-identical.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rrd/kernels.hpp"
#include "rrd/rng.hpp"

namespace {

double time_best_ms(int reps, const std::function<void()>& body) {
  double best = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    body();
    const auto stop = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(stop - start).count();
    if (r == 0 || ms < best) best = ms;
  }
  return best;
}

std::vector<double> random_buffer(size_t n, rrd::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.next_gaussian();
  return v;
}

bool identical(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void report(const std::string& name, double serial_ms, double parallel_ms, bool same) {
  std::printf("%-24s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   identical %s\n",
              name.c_str(), serial_ms, parallel_ms,
              parallel_ms > 0.0 ? serial_ms / parallel_ms : 0.0, same ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel benchmark: OpenMP vs serial reference"};
  int reps = 5;
  int64_t scale = 1;
  app.add_option("--reps", reps, "timed repetitions per kernel (best is reported)");
  app.add_option("--scale", scale, "multiplies every problem size");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  namespace k = rrd::kernels;
  rrd::Rng rng(20240517);
  bool all_identical = true;

  {
    const int64_t m = 192 * scale, n = 192 * scale, kk = 192 * scale;
    const auto a = random_buffer(m * kk, rng);
    const auto b = random_buffer(kk * n, rng);
    std::vector<double> c_ref(m * n, 0.0), c_par(m * n, 0.0);
    const double t_ref =
        time_best_ms(reps, [&] { k::ref::gemm(false, false, m, n, kk, a.data(), b.data(), c_ref.data()); });
    const double t_par =
        time_best_ms(reps, [&] { k::gemm(false, false, m, n, kk, a.data(), b.data(), c_par.data()); });
    const bool same = identical(c_ref, c_par);
    all_identical = all_identical && same;
    report("gemm(NN) 192^3", t_ref, t_par, same);
  }

  {
    // Similarity shape: batch x dim against bank x dim, transposed second factor.
    const int64_t m = 256 * scale, n = 512 * scale, kk = 128 * scale;
    const auto a = random_buffer(m * kk, rng);
    const auto b = random_buffer(n * kk, rng);
    std::vector<double> c_ref(m * n, 0.0), c_par(m * n, 0.0);
    const double t_ref =
        time_best_ms(reps, [&] { k::ref::gemm(false, true, m, n, kk, a.data(), b.data(), c_ref.data()); });
    const double t_par =
        time_best_ms(reps, [&] { k::gemm(false, true, m, n, kk, a.data(), b.data(), c_par.data()); });
    const bool same = identical(c_ref, c_par);
    all_identical = all_identical && same;
    report("gemm(NT) 256x512x128", t_ref, t_par, same);
  }

  {
    const int64_t rows = 4096 * scale, cols = 512;
    const auto x = random_buffer(rows * cols, rng);
    std::vector<double> y_ref(rows * cols), y_par(rows * cols);
    const double t_ref = time_best_ms(
        reps, [&] { k::ref::softmax_rows(x.data(), y_ref.data(), rows, cols, 0.1); });
    const double t_par =
        time_best_ms(reps, [&] { k::softmax_rows(x.data(), y_par.data(), rows, cols, 0.1); });
    const bool same = identical(y_ref, y_par);
    all_identical = all_identical && same;
    report("softmax_rows 4096x512", t_ref, t_par, same);

    const double lt_ref = time_best_ms(
        reps, [&] { k::ref::log_softmax_rows(x.data(), y_ref.data(), rows, cols, 0.1); });
    const double lt_par =
        time_best_ms(reps, [&] { k::log_softmax_rows(x.data(), y_par.data(), rows, cols, 0.1); });
    const bool lsame = identical(y_ref, y_par);
    all_identical = all_identical && lsame;
    report("log_softmax 4096x512", lt_ref, lt_par, lsame);
  }

  {
    const int64_t rows = 8192 * scale, cols = 256;
    const auto x = random_buffer(rows * cols, rng);
    const auto factors = random_buffer(rows, rng);
    std::vector<double> n_ref(rows), n_par(rows);
    std::vector<double> y_ref(rows * cols), y_par(rows * cols);

    const double t_ref =
        time_best_ms(reps, [&] { k::ref::row_norms(x.data(), n_ref.data(), rows, cols); });
    const double t_par =
        time_best_ms(reps, [&] { k::row_norms(x.data(), n_par.data(), rows, cols); });
    const bool same = identical(n_ref, n_par);
    all_identical = all_identical && same;
    report("row_norms 8192x256", t_ref, t_par, same);

    const double s_ref = time_best_ms(
        reps, [&] { k::ref::scale_rows(x.data(), factors.data(), y_ref.data(), rows, cols); });
    const double s_par = time_best_ms(
        reps, [&] { k::scale_rows(x.data(), factors.data(), y_par.data(), rows, cols); });
    const bool ssame = identical(y_ref, y_par);
    all_identical = all_identical && ssame;
    report("scale_rows 8192x256", s_ref, s_par, ssame);
  }

  if (!all_identical) {
    std::fprintf(stderr, "FAIL: parallel kernels diverged from the serial reference\n");
    return 1;
  }
  return 0;
}
