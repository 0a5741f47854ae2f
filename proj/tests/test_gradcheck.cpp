// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <string>

#include "rrd/gradcheck.hpp"
#include "rrd/tensor.hpp"

using namespace rrd;

TEST_CASE("finite differences agree with backward on a closed-form case") {
  // f(a) = sum(a * a): exact gradient 2a, so the check must come out tiny.
  Tensor a = Tensor::row({0.5, -1.25, 2.0}, true);
  const double err = finite_difference_check([&] { return sum(mul(a, a)); }, {a});
  CHECK(err < 1e-9);
}

TEST_CASE("finite differences catch a wrong gradient") {
  // The loss uses a detached copy, so backward leaves the parameter's
  // gradient at zero while the finite difference sees the true slope.
  Tensor a = Tensor::row({1.0, 2.0}, true);
  const double err = finite_difference_check(
      [&] {
        Tensor frozen = a.detach();
        return add(sum(mul(frozen, frozen)), mul_scalar(sum(a), 0.0));
      },
      {a});
  CHECK(err > 0.1);
}

TEST_CASE("the loss suite covers every objective and passes its threshold") {
  GradCheckReport report = run_loss_gradcheck_suite(321, 2);
  std::set<std::string> names;
  for (const auto& c : report.cases) {
    names.insert(c.name);
    CHECK(c.max_rel_error < kGradCheckThreshold);
  }
  const std::set<std::string> expect = {"cross_entropy", "kd_kl", "rrd_enqueue_first",
                                        "rrd_append", "infonce", "combined"};
  CHECK(names == expect);
  CHECK(report.max_rel_error < kGradCheckThreshold);

  // The report's max is the max over its cases.
  double mx = 0.0;
  for (const auto& c : report.cases) mx = std::max(mx, c.max_rel_error);
  CHECK(report.max_rel_error == mx);
}
