// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rrd/tensor.hpp"

namespace rrd {

// Problem sizes for the finite-difference suite. Small on purpose: the check
// perturbs every parameter element twice.
struct GradCheckSizes {
  int64_t batch{5};
  int64_t input_dim{3};
  int64_t hidden{16};
  int64_t proj_dim{4};
  int64_t num_classes{3};
  int64_t bank_capacity{6};
};

struct GradCheckCase {
  std::string name;
  double max_rel_error{0.0};
};

// Largest relative error the suite accepts.
inline constexpr double kGradCheckThreshold = 1e-5;

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double max_rel_error{0.0};
};

// Compares backward() against central differences for every element of every
// parameter. make_loss must rebuild the loss from the current parameter values
// on each call. Returns the maximum relative error, where the denominator is
// floored at 1e-2 so near-zero gradients are compared absolutely.
double finite_difference_check(const std::function<Tensor()>& make_loss,
                               const std::vector<Tensor>& params, double eps = 1e-5);

// Runs every loss in the library through a small randomly initialized model
// and checks its end-to-end gradient, num_seeds times with distinct draws.
GradCheckReport run_loss_gradcheck_suite(uint64_t base_seed, int64_t num_seeds,
                                         const GradCheckSizes& sizes = {});

}  // namespace rrd
