// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <vector>

#include "CLI11.hpp"

#include "rrd/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"memory-bank relational distillation toolkit"};
  app.require_subcommand(1);

  using namespace rrd::commands;
  int exit_code = 0;

  TrainArgs teacher_args;
  uint64_t teacher_seed = 0;
  auto* teacher_cmd = app.add_subcommand("train-teacher", "train a teacher from scratch");
  teacher_cmd->add_option("--config", teacher_args.config_path, "experiment config JSON")
      ->required();
  teacher_cmd->add_option("--out", teacher_args.out_path, "checkpoint output path")->required();
  teacher_cmd->add_option("--metrics", teacher_args.metrics_path,
                          "metrics CSV path (default: <out>.metrics.csv)");
  auto* teacher_seed_opt =
      teacher_cmd->add_option("--seed-override", teacher_seed, "replace all named seeds");
  teacher_cmd->callback([&] {
    if (teacher_seed_opt->count() > 0) teacher_args.seed_override = teacher_seed;
    exit_code = cmd_train_teacher(teacher_args);
  });

  TrainArgs student_args;
  uint64_t student_seed = 0;
  auto* student_cmd =
      app.add_subcommand("train-student", "train the student without a teacher");
  student_cmd->add_option("--config", student_args.config_path, "experiment config JSON")
      ->required();
  student_cmd->add_option("--out", student_args.out_path, "checkpoint output path")->required();
  student_cmd->add_option("--metrics", student_args.metrics_path,
                          "metrics CSV path (default: <out>.metrics.csv)");
  auto* student_seed_opt =
      student_cmd->add_option("--seed-override", student_seed, "replace all named seeds");
  student_cmd->callback([&] {
    if (student_seed_opt->count() > 0) student_args.seed_override = student_seed;
    exit_code = cmd_train_student(student_args);
  });

  TrainArgs distill_args;
  uint64_t distill_seed = 0;
  auto* distill_cmd = app.add_subcommand("distill", "train the student against a teacher");
  distill_cmd->add_option("--config", distill_args.config_path, "experiment config JSON")
      ->required();
  distill_cmd->add_option("--teacher", distill_args.teacher_path, "teacher checkpoint")
      ->required();
  distill_cmd->add_option("--out", distill_args.out_path, "checkpoint output path")->required();
  distill_cmd->add_option("--metrics", distill_args.metrics_path,
                          "metrics CSV path (default: <out>.metrics.csv)");
  auto* distill_seed_opt =
      distill_cmd->add_option("--seed-override", distill_seed, "replace all named seeds");
  distill_cmd->callback([&] {
    if (distill_seed_opt->count() > 0) distill_args.seed_override = distill_seed;
    exit_code = cmd_distill(distill_args);
  });

  EvalArgs eval_args;
  uint64_t eval_seed = 0;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--config", eval_args.config_path, "experiment config JSON")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint_path, "checkpoint to evaluate")
      ->required();
  eval_cmd->add_option("--teacher", eval_args.teacher_path,
                       "teacher checkpoint for the logit correlation block");
  eval_cmd->add_option("--report", eval_args.report_path, "also write the JSON report here");
  eval_cmd->add_option("--correlation-csv", eval_args.correlation_csv,
                       "write the correlation difference matrix here");
  eval_cmd->add_flag("--probe", eval_args.linear_probe, "run the linear probe");
  auto* eval_seed_opt =
      eval_cmd->add_option("--seed-override", eval_seed, "replace all named seeds");
  eval_cmd->callback([&] {
    if (eval_seed_opt->count() > 0) eval_args.seed_override = eval_seed;
    exit_code = cmd_eval(eval_args);
  });

  GradcheckArgs gradcheck_args;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference check of every loss gradient");
  gradcheck_cmd->add_option("--seed", gradcheck_args.seed, "base seed");
  gradcheck_cmd->add_option("--num-seeds", gradcheck_args.num_seeds, "random draws per loss");
  gradcheck_cmd->callback([&] { exit_code = cmd_gradcheck(gradcheck_args); });

  ExportArgs export_args;
  uint64_t export_seed = 0;
  auto* export_cmd =
      app.add_subcommand("export-embeddings", "dump projection embeddings to CSV");
  export_cmd->add_option("--config", export_args.config_path, "experiment config JSON")
      ->required();
  export_cmd->add_option("--checkpoint", export_args.checkpoint_path, "checkpoint to load")
      ->required();
  export_cmd->add_option("--out", export_args.out_path, "CSV output path")->required();
  auto* export_seed_opt =
      export_cmd->add_option("--seed-override", export_seed, "replace all named seeds");
  export_cmd->callback([&] {
    if (export_seed_opt->count() > 0) export_args.seed_override = export_seed;
    exit_code = cmd_export_embeddings(export_args);
  });

  SweepArgs sweep_args;
  uint64_t sweep_seed = 0;
  auto* sweep_cmd = app.add_subcommand("sweep", "distill across one hyperparameter axis");
  sweep_cmd->add_option("--config", sweep_args.config_path, "experiment config JSON")->required();
  sweep_cmd->add_option("--teacher", sweep_args.teacher_path, "teacher checkpoint")->required();
  sweep_cmd
      ->add_option("--axis", sweep_args.axis,
                   "tau_teacher | tau_student | beta | lambda | bank_capacity | momentum_alpha")
      ->required();
  sweep_cmd->add_option("--values", sweep_args.values, "axis values")->required()->expected(-1);
  sweep_cmd->add_option("--out-dir", sweep_args.out_dir, "directory for per-run metrics")
      ->required();
  auto* sweep_seed_opt =
      sweep_cmd->add_option("--seed-override", sweep_seed, "replace all named seeds");
  sweep_cmd->callback([&] {
    if (sweep_seed_opt->count() > 0) sweep_args.seed_override = sweep_seed;
    exit_code = cmd_sweep(sweep_args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return exit_code;
}
