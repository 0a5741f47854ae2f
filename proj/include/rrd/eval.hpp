// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrd/data.hpp"
#include "rrd/nn.hpp"
#include "rrd/tensor.hpp"

namespace rrd {

// Fraction of rows whose argmax matches the label. Ties resolve to the lowest
// column index.
double top1_accuracy(const Tensor& logits, const std::vector<int>& labels);

// Pearson correlation between logit columns over the sample axis: [c x c].
// A constant column has no correlation and raises an error naming the class.
Tensor class_correlation_matrix(const Tensor& logits);

struct CorrelationDiff {
  Tensor difference;  // teacher correlations minus student correlations, [c x c]
  double mean_abs{0.0};
  double max_abs{0.0};
};

// How differently two models relate the classes: elementwise difference of
// their logit correlation matrices over the same samples.
CorrelationDiff logit_correlation_difference(const Tensor& teacher_logits,
                                             const Tensor& student_logits);

struct ProbeConfig {
  int64_t steps{200};
  double learning_rate{0.1};
  uint64_t seed{7};
};

// Accuracy of a fresh linear classifier trained full-batch (plain gradient
// descent) on the frozen encoder's backbone features over the transfer
// dataset's train split, scored on its test split. The encoder must be frozen
// and is never modified.
double linear_probe_accuracy(const Model& encoder, const Dataset& transfer,
                             const ProbeConfig& config);

// CSV "sample_index,label,e_0,..." of projection embeddings for every sample.
void export_embeddings_csv(const Model& model, const Dataset& dataset, const std::string& path);

// CSV of a square matrix, one header row c_0..c_{n-1}.
void write_matrix_csv(const Tensor& matrix, const std::string& path);

}  // namespace rrd
