// SPDX-License-Identifier: Apache-2.0
#include "rrd/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#include "json.hpp"

#include "rrd/config.hpp"
#include "rrd/errors.hpp"
#include "rrd/eval.hpp"
#include "rrd/gradcheck.hpp"
#include "rrd/io_util.hpp"
#include "rrd/train.hpp"

namespace rrd::commands {

namespace {

void apply_seed_override(ExperimentConfig& config, const std::optional<uint64_t>& override) {
  if (override) {
    config.seeds.init = *override;
    config.seeds.shuffle = *override + 1;
    config.seeds.bank = *override + 2;
  }
}

ExperimentConfig load_and_validate(const std::string& config_path,
                                   const std::optional<uint64_t>& seed_override) {
  ExperimentConfig config = load_config(config_path);
  apply_seed_override(config, seed_override);
  config.validate();
  return config;
}

std::string metrics_path_for(const TrainArgs& args) {
  return args.metrics_path.empty() ? args.out_path + ".metrics.csv" : args.metrics_path;
}

const EpochMetrics* last_test_row(const std::vector<EpochMetrics>& metrics) {
  for (auto it = metrics.rbegin(); it != metrics.rend(); ++it) {
    if (it->split == "test") return &*it;
  }
  return metrics.empty() ? nullptr : &metrics.back();
}

std::string compact_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log_error(e.what());
    return 2;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 3;
  }
}

enum class StudentMode { kTeacher, kSupervised, kDistill };

int run_training(const TrainArgs& args, StudentMode mode) {
  return run_guarded([&] {
    if (args.config_path.empty() || args.out_path.empty()) {
      throw ConfigError("--config and --out are required");
    }
    ExperimentConfig config = load_and_validate(args.config_path, args.seed_override);
    Dataset dataset = build_dataset(config.data, config.seeds);

    TrainResult result;
    if (mode == StudentMode::kTeacher) {
      result = train_teacher(config, dataset);
    } else if (mode == StudentMode::kSupervised) {
      result = train_student_supervised(config, dataset);
    } else {
      if (args.teacher_path.empty()) {
        throw ConfigError("distillation requires --teacher");
      }
      Checkpoint teacher = load_checkpoint(args.teacher_path);
      result = distill(config, teacher, dataset);
    }

    save_checkpoint(result.checkpoint, args.out_path);
    write_metrics_csv(result.metrics, metrics_path_for(args));

    const EpochMetrics* last = last_test_row(result.metrics);
    log_info("wrote " + args.out_path +
             (last != nullptr ? " (final " + last->split + " top1 " + format_double(last->top1) + ")"
                              : ""));
    return 0;
  });
}

}  // namespace

int cmd_train_teacher(const TrainArgs& args) { return run_training(args, StudentMode::kTeacher); }

int cmd_train_student(const TrainArgs& args) {
  return run_training(args, StudentMode::kSupervised);
}

int cmd_distill(const TrainArgs& args) { return run_training(args, StudentMode::kDistill); }

int cmd_eval(const EvalArgs& args) {
  return run_guarded([&] {
    if (args.config_path.empty() || args.checkpoint_path.empty()) {
      throw ConfigError("--config and --checkpoint are required");
    }
    ExperimentConfig config = load_and_validate(args.config_path, args.seed_override);
    Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
    Model model = model_from_checkpoint(ckpt);
    model.set_frozen(true);

    Dataset dataset = build_dataset(config.data, config.seeds);
    if (dataset.test_indices.empty()) {
      throw ConfigError("dataset has no test split to evaluate on");
    }

    nlohmann::json report;
    report["checkpoint"] = args.checkpoint_path;
    report["epoch"] = ckpt.epoch;

    {
      NoGradGuard guard;
      auto [test_x, test_y] = dataset.gather(dataset.test_indices);
      ForwardResult s = model.forward(test_x);
      report["test"] = {
          {"top1", top1_accuracy(s.logits, test_y)},
          {"cross_entropy", cross_entropy_loss(s.logits, test_y).value()},
          {"samples", static_cast<int64_t>(dataset.test_indices.size())},
      };

      if (!args.teacher_path.empty()) {
        Checkpoint teacher_ckpt = load_checkpoint(args.teacher_path);
        Model teacher = model_from_checkpoint(teacher_ckpt);
        teacher.set_frozen(true);
        ForwardResult t = teacher.forward(test_x);
        CorrelationDiff diff = logit_correlation_difference(t.logits, s.logits);
        report["logit_correlation"] = {
            {"mean_abs_difference", diff.mean_abs},
            {"max_abs_difference", diff.max_abs},
            {"teacher_top1", top1_accuracy(t.logits, test_y)},
        };
        if (!args.correlation_csv.empty()) {
          write_matrix_csv(diff.difference, args.correlation_csv);
          report["logit_correlation"]["matrix_csv"] = args.correlation_csv;
        }
      }
    }

    if (args.linear_probe || config.eval.linear_probe) {
      Dataset transfer = config.eval.transfer
                             ? build_dataset(*config.eval.transfer, config.seeds, 1)
                             : dataset;
      report["probe_top1"] = linear_probe_accuracy(model, transfer, config.eval.probe);
    }

    const std::string text = report.dump(2) + "\n";
    std::cout << text;
    if (!args.report_path.empty()) {
      write_file_atomic(args.report_path, text);
    }
    return 0;
  });
}

int cmd_gradcheck(const GradcheckArgs& args) {
  return run_guarded([&] {
    GradCheckReport report = run_loss_gradcheck_suite(args.seed, args.num_seeds, {});
    for (const GradCheckCase& c : report.cases) {
      std::cout << "gradcheck " << c.name << " max_rel_error " << format_double(c.max_rel_error)
                << "\n";
    }
    std::cout << "gradcheck overall max_rel_error " << format_double(report.max_rel_error)
              << " threshold " << format_double(kGradCheckThreshold) << "\n";
    if (report.max_rel_error >= kGradCheckThreshold) {
      log_error("gradient check failed");
      return 3;
    }
    return 0;
  });
}

int cmd_export_embeddings(const ExportArgs& args) {
  return run_guarded([&] {
    if (args.config_path.empty() || args.checkpoint_path.empty() || args.out_path.empty()) {
      throw ConfigError("--config, --checkpoint and --out are required");
    }
    ExperimentConfig config = load_and_validate(args.config_path, args.seed_override);
    Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
    Model model = model_from_checkpoint(ckpt);
    Dataset dataset = build_dataset(config.data, config.seeds);
    export_embeddings_csv(model, dataset, args.out_path);
    log_info("wrote " + args.out_path);
    return 0;
  });
}

int cmd_sweep(const SweepArgs& args) {
  return run_guarded([&] {
    if (args.config_path.empty() || args.teacher_path.empty() || args.out_dir.empty()) {
      throw ConfigError("--config, --teacher and --out-dir are required");
    }
    if (args.values.empty()) {
      throw ConfigError("sweep needs at least one --value");
    }

    using Setter = std::function<void(ExperimentConfig&, double)>;
    Setter setter;
    if (args.axis == "tau_teacher") {
      setter = [](ExperimentConfig& c, double v) { c.loss.tau_teacher = v; };
    } else if (args.axis == "tau_student") {
      setter = [](ExperimentConfig& c, double v) { c.loss.tau_student = v; };
    } else if (args.axis == "beta") {
      setter = [](ExperimentConfig& c, double v) { c.loss.beta_rrd = v; };
    } else if (args.axis == "lambda") {
      setter = [](ExperimentConfig& c, double v) { c.loss.lambda_kd = v; };
    } else if (args.axis == "bank_capacity") {
      setter = [](ExperimentConfig& c, double v) {
        if (v < 1.0 || v != std::floor(v)) {
          throw ConfigError("bank_capacity sweep values must be positive integers");
        }
        c.bank.capacity = static_cast<int64_t>(v);
      };
    } else if (args.axis == "momentum_alpha") {
      setter = [](ExperimentConfig& c, double v) { c.bank.momentum_alpha = v; };
    } else {
      throw ConfigError("unknown sweep axis '" + args.axis +
                        "' (valid: tau_teacher, tau_student, beta, lambda, bank_capacity, "
                        "momentum_alpha)");
    }

    ExperimentConfig base = load_and_validate(args.config_path, args.seed_override);
    Checkpoint teacher = load_checkpoint(args.teacher_path);
    Dataset dataset = build_dataset(base.data, base.seeds);

    std::error_code ec;
    std::filesystem::create_directories(args.out_dir, ec);
    if (ec) {
      throw ConfigError("cannot create sweep output directory " + args.out_dir + ": " +
                        ec.message());
    }

    std::string summary = "axis,value,test_top1,test_loss_total,test_loss_sup,test_loss_kd,"
                          "test_loss_rrd\n";
    for (double value : args.values) {
      ExperimentConfig config = base;
      setter(config, value);
      config.validate();

      TrainResult result = distill(config, teacher, dataset);
      const std::string tag = args.axis + "_" + compact_double(value);
      write_metrics_csv(result.metrics, args.out_dir + "/" + tag + ".metrics.csv");

      const EpochMetrics* last = last_test_row(result.metrics);
      if (last == nullptr) {
        throw NumericalError("sweep run " + tag + " produced no metrics");
      }
      summary += args.axis + "," + compact_double(value) + "," + format_double(last->top1) + "," +
                 format_double(last->loss_total) + "," + format_double(last->loss_sup) + "," +
                 format_double(last->loss_kd) + "," + format_double(last->loss_rrd) + "\n";
      log_info("sweep " + tag + " test top1 " + format_double(last->top1));
    }
    write_file_atomic(args.out_dir + "/sweep_summary.csv", summary);
    return 0;
  });
}

}  // namespace rrd::commands
