// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "rrd/memory_bank.hpp"
#include "rrd/tensor.hpp"

namespace rrd {

// When the relation targets are built: enqueue_first pushes the incoming
// teacher batch into the bank before computing similarities; append leaves the
// bank untouched and instead extends each row's similarity vector with its own
// teacher feature (the bank is updated after the loss in that mode).
enum class RrdMode { kEnqueueFirst, kAppend };

struct LossWeights {
  double lambda_kd{0.9};
  double beta_rrd{1.5};
  double tau_kd{4.0};
  double tau_student{0.1};
  double tau_teacher{0.02};

  void validate() const;
};

// Softmax of raw similarity rows at the given temperature.
Tensor similarity_distribution(const Tensor& raw_similarities, double temperature);

// Mean over the batch of the cross-entropy between the teacher's relational
// distribution (stop-gradient, temperature tau_teacher) and the student's
// (temperature tau_student), both taken against the same bank rows.
Tensor rrd_loss(const Tensor& student_embedding, const Tensor& teacher_embedding,
                const MemoryBank& bank, double tau_student, double tau_teacher, RrdMode mode);

// Contrastive baseline: picks the student's own teacher feature out of the
// bank rows plus that appended positive, at a single temperature.
Tensor infonce_loss(const Tensor& student_embedding, const Tensor& teacher_embedding,
                    const MemoryBank& bank, double tau);

// tau^2-scaled KL between teacher and student softened logits (teacher side is
// stop-gradient). Identical logits give exactly zero.
Tensor kd_kl_loss(const Tensor& student_logits, const Tensor& teacher_logits, double tau);

// Mean negative log-likelihood of the labels under softmax(logits).
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);

// supervised + lambda * kd + beta * rrd. All inputs are scalars; weights must
// be non-negative.
Tensor combined_objective(const Tensor& supervised, const Tensor& kd, const Tensor& rrd,
                          double lambda_kd, double beta_rrd);

// Plain per-row distribution statistics (no autodiff). Rows must be
// probability vectors; zero entries contribute zero to entropy terms.
std::vector<double> row_entropy(const Tensor& p);
std::vector<double> row_cross_entropy(const Tensor& p, const Tensor& q);
std::vector<double> row_kl_divergence(const Tensor& p, const Tensor& q);

}  // namespace rrd
