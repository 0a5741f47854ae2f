// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "rrd/data.hpp"
#include "rrd/eval.hpp"
#include "rrd/losses.hpp"
#include "rrd/memory_bank.hpp"
#include "rrd/nn.hpp"

namespace rrd {

struct DataConfig {
  std::string kind{"blobs"};  // blobs | spirals | csv
  int num_classes{10};
  int samples_per_class{200};
  int dim{2};
  double cluster_std{1.0};
  double label_noise_fraction{0.1};
  double noise{0.2};  // spiral coordinate noise
  std::string csv_path;
  std::string label_column{"label"};
  double test_fraction{0.25};

  void validate() const;
};

struct TrainConfig {
  int64_t epochs{60};
  int64_t batch_size{64};
  double learning_rate{0.05};
  double momentum{0.9};
  double weight_decay{5e-4};
  std::vector<double> lr_decay_fractions{0.5, 0.75};
  double lr_decay_multiplier{0.1};

  void validate() const;
};

struct BankConfig {
  int64_t capacity{512};
  BankStrategy strategy{BankStrategy::kFifo};
  double momentum_alpha{0.999};
  RrdMode mode{RrdMode::kEnqueueFirst};

  void validate() const;
};

struct EvalConfig {
  bool linear_probe{false};
  ProbeConfig probe;
  // Dataset the probe trains on; absent means the run's own dataset.
  std::optional<DataConfig> transfer;
};

struct Seeds {
  uint64_t init{1};
  uint64_t shuffle{2};
  uint64_t bank{3};
};

struct ExperimentConfig {
  ModelSpec model_teacher;
  ModelSpec model_student;
  DataConfig data;
  TrainConfig train;
  LossWeights loss;
  BankConfig bank;
  EvalConfig eval;
  Seeds seeds;

  void validate() const;
};

// Strict parse: unknown keys and wrong types are errors naming the offending
// path; missing fields fall back to the defaults above.
ExperimentConfig parse_config_json(const std::string& json_text, const std::string& origin);
ExperimentConfig load_config(const std::string& path);

// Full round-trip serialization (every field, defaults included).
std::string config_to_json(const ExperimentConfig& config);

// Materializes the dataset a config describes. Generated kinds derive their
// seed from the named seeds; `stream` separates the main dataset from e.g. the
// probe transfer set.
Dataset build_dataset(const DataConfig& data, const Seeds& seeds, uint64_t stream = 0);

std::string bank_strategy_name(BankStrategy s);
std::string rrd_mode_name(RrdMode m);

}  // namespace rrd
