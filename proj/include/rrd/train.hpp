// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrd/config.hpp"
#include "rrd/data.hpp"
#include "rrd/memory_bank.hpp"
#include "rrd/nn.hpp"

namespace rrd {

// Step schedule: the base rate is multiplied by lr_decay_multiplier once the
// epoch reaches floor(fraction * epochs), for each fraction.
double lr_at_epoch(const TrainConfig& train, int64_t epoch);

// SGD with classic momentum and decoupled-from-nothing weight decay folded
// into the gradient: v <- momentum * v + g + weight_decay * p; p <- p - lr * v.
// velocity is initialized lazily on the first call and must stay aligned with
// params afterwards. An empty span means the parameter has no gradient this
// step; it and its velocity are left untouched.
void sgd_update(const std::vector<Tensor>& params,
                const std::vector<std::span<const double>>& grads, double lr, double momentum,
                double weight_decay, std::vector<std::vector<double>>& velocity);

// Convenience overload reading each parameter's own accumulated gradient.
// Parameters the last backward never reached are skipped for this step.
void sgd_update(const std::vector<Tensor>& params, double lr, double momentum,
                double weight_decay, std::vector<std::vector<double>>& velocity);

struct EpochMetrics {
  int64_t epoch{0};
  std::string split;
  double loss_total{0.0};
  double loss_sup{0.0};
  double loss_kd{0.0};
  double loss_rrd{0.0};
  double top1{0.0};
};

// CSV with header epoch,split,loss_total,loss_sup,loss_kd,loss_rrd,top1 and
// %.17g values, written atomically. Byte-identical across reruns of the same
// seeded run.
void write_metrics_csv(const std::vector<EpochMetrics>& metrics, const std::string& path);

struct CheckpointParam {
  std::string name;
  int64_t rows{0};
  int64_t cols{0};
  std::vector<double> data;
};

struct BankState {
  int64_t capacity{0};
  int64_t dim{0};
  BankStrategy strategy{BankStrategy::kFifo};
  double momentum_alpha{0.999};
  int64_t cursor{0};
  std::vector<double> storage;
};

struct Checkpoint {
  ModelSpec arch;
  std::vector<CheckpointParam> params;
  std::vector<std::vector<double>> velocity;  // empty when not saved
  std::optional<BankState> bank;
  std::string config_json;
  int64_t epoch{0};
  Seeds seeds;
  uint64_t sample_counter{0};
};

// Length-prefixed little-endian binary sections under a magic header.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the architecture and copies the stored parameters in (names and
// shapes must match exactly).
Model model_from_checkpoint(const Checkpoint& ckpt);

Checkpoint make_checkpoint(const Model& model, const std::vector<std::vector<double>>& velocity,
                           const ExperimentConfig& config, int64_t epoch,
                           uint64_t sample_counter);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
};

// Supervised teacher training: classification loss on the logits plus an
// auxiliary classification loss through the projection head, so the embedding
// space is shaped by the labels too. The auxiliary head is a training-only
// device and is not part of the checkpoint.
TrainResult train_teacher(const ExperimentConfig& config, const Dataset& dataset);

// Supervised student baseline: same loop, init stream, and batching as
// distillation, with both distillation terms absent.
TrainResult train_student_supervised(const ExperimentConfig& config, const Dataset& dataset);

// Distillation: supervised + lambda * logit matching + beta * relational loss
// against the bank of teacher features. The teacher is loaded frozen; only
// student parameters move.
TrainResult distill(const ExperimentConfig& config, const Checkpoint& teacher_ckpt,
                    const Dataset& dataset);

}  // namespace rrd
