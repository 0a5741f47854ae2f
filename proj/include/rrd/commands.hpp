// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rrd::commands {

// Every command returns a process exit code: 0 on success, 2 for configuration
// and input-file problems, 3 for numerical failures. Commands are callable
// in-process so tests can drive them without spawning binaries.

struct TrainArgs {
  std::string config_path;
  std::string out_path;
  std::string metrics_path;              // empty: derived as <out_path>.metrics.csv
  std::string teacher_path;              // distill only
  std::optional<uint64_t> seed_override;  // replaces all named seeds (v, v+1, v+2)
};

int cmd_train_teacher(const TrainArgs& args);
int cmd_train_student(const TrainArgs& args);
int cmd_distill(const TrainArgs& args);

struct EvalArgs {
  std::string config_path;
  std::string checkpoint_path;
  std::string teacher_path;     // optional: enables the logit correlation block
  std::string report_path;      // optional: JSON report copy
  std::string correlation_csv;  // optional: correlation difference matrix
  bool linear_probe{false};     // forces the probe on even if the config leaves it off
  std::optional<uint64_t> seed_override;
};

int cmd_eval(const EvalArgs& args);

struct GradcheckArgs {
  uint64_t seed{12345};
  int64_t num_seeds{3};
};

int cmd_gradcheck(const GradcheckArgs& args);

struct ExportArgs {
  std::string config_path;
  std::string checkpoint_path;
  std::string out_path;
  std::optional<uint64_t> seed_override;
};

int cmd_export_embeddings(const ExportArgs& args);

struct SweepArgs {
  std::string config_path;
  std::string teacher_path;
  std::string axis;  // tau_teacher | tau_student | beta | lambda | bank_capacity | momentum_alpha
  std::vector<double> values;
  std::string out_dir;
  std::optional<uint64_t> seed_override;
};

int cmd_sweep(const SweepArgs& args);

}  // namespace rrd::commands
