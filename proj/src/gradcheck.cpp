// SPDX-License-Identifier: Apache-2.0
#include "rrd/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

#include "rrd/losses.hpp"
#include "rrd/memory_bank.hpp"
#include "rrd/nn.hpp"
#include "rrd/rng.hpp"

namespace rrd {

double finite_difference_check(const std::function<Tensor()>& make_loss,
                               const std::vector<Tensor>& params, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("finite_difference_check: eps must be positive");
  }

  for (const Tensor& p : params) {
    Tensor mutable_p = p;
    mutable_p.zero_grad();
  }
  Tensor loss = make_loss();
  loss.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    if (p.has_grad()) {
      analytic.push_back(p.grad());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
  }

  double max_rel = 0.0;
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    auto& data = p.data();
    for (size_t j = 0; j < data.size(); ++j) {
      const double original = data[j];
      double plus, minus;
      {
        NoGradGuard guard;
        data[j] = original + eps;
        plus = make_loss().value();
        data[j] = original - eps;
        minus = make_loss().value();
        data[j] = original;
      }
      const double fd = (plus - minus) / (2.0 * eps);
      const double g = analytic[i][j];
      const double denom = std::max({std::fabs(fd), std::fabs(g), 1e-2});
      max_rel = std::max(max_rel, std::fabs(fd - g) / denom);
    }
  }
  return max_rel;
}

namespace {

Tensor random_unit_rows(int64_t rows, int64_t cols, Rng& rng) {
  std::vector<double> data(static_cast<size_t>(rows) * cols);
  for (int64_t r = 0; r < rows; ++r) {
    double norm_sq = 0.0;
    do {
      norm_sq = 0.0;
      for (int64_t c = 0; c < cols; ++c) {
        const double v = rng.next_gaussian();
        data[r * cols + c] = v;
        norm_sq += v * v;
      }
    } while (norm_sq < 1e-12);
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (int64_t c = 0; c < cols; ++c) data[r * cols + c] *= inv;
  }
  return Tensor::from_data(Shape{rows, cols}, std::move(data));
}

Tensor random_matrix(int64_t rows, int64_t cols, Rng& rng) {
  std::vector<double> data(static_cast<size_t>(rows) * cols);
  for (double& v : data) v = rng.next_gaussian();
  return Tensor::from_data(Shape{rows, cols}, std::move(data));
}

}  // namespace

GradCheckReport run_loss_gradcheck_suite(uint64_t base_seed, int64_t num_seeds,
                                         const GradCheckSizes& sizes) {
  if (num_seeds < 1) {
    throw std::invalid_argument("run_loss_gradcheck_suite: num_seeds must be at least 1");
  }
  if (sizes.batch < 1 || sizes.input_dim < 1 || sizes.hidden < 1 || sizes.proj_dim < 1 ||
      sizes.num_classes < 2 || sizes.bank_capacity < 1) {
    throw std::invalid_argument("run_loss_gradcheck_suite: sizes must be positive");
  }

  const std::vector<std::string> case_names = {"cross_entropy", "kd_kl",    "rrd_enqueue_first",
                                               "rrd_append",    "infonce", "combined"};
  GradCheckReport report;
  for (const std::string& name : case_names) {
    report.cases.push_back({name, 0.0});
  }

  const ModelSpec spec{{sizes.input_dim, sizes.hidden}, sizes.num_classes, sizes.proj_dim};

  for (int64_t s = 0; s < num_seeds; ++s) {
    for (size_t c = 0; c < case_names.size(); ++c) {
      const uint64_t seed = mix_seed(mix_seed(base_seed, c + 1), static_cast<uint64_t>(s) + 1);
      Rng rng(mix_seed(seed, 0));

      Model model = Model::init(spec, mix_seed(seed, 1));
      const Tensor features = random_matrix(sizes.batch, sizes.input_dim, rng);
      std::vector<int> labels(sizes.batch);
      for (int& label : labels) {
        label = static_cast<int>(rng.next_below(static_cast<uint64_t>(sizes.num_classes)));
      }
      const Tensor teacher_logits = random_matrix(sizes.batch, sizes.num_classes, rng);
      const Tensor teacher_embedding = random_unit_rows(sizes.batch, sizes.proj_dim, rng);
      const MemoryBank bank(sizes.bank_capacity, sizes.proj_dim, BankStrategy::kFifo,
                            mix_seed(seed, 2));

      // Moderate temperatures keep the softened distributions away from the
      // saturated regime where central differences lose accuracy.
      std::function<Tensor()> make_loss;
      switch (c) {
        case 0:
          make_loss = [&] {
            return cross_entropy_loss(model.forward(features).logits, labels);
          };
          break;
        case 1:
          make_loss = [&] {
            return kd_kl_loss(model.forward(features).logits, teacher_logits, 2.0);
          };
          break;
        case 2:
          make_loss = [&] {
            return rrd_loss(model.forward(features).embedding, teacher_embedding, bank, 0.5, 0.2,
                            RrdMode::kEnqueueFirst);
          };
          break;
        case 3:
          make_loss = [&] {
            return rrd_loss(model.forward(features).embedding, teacher_embedding, bank, 0.5, 0.2,
                            RrdMode::kAppend);
          };
          break;
        case 4:
          make_loss = [&] {
            return infonce_loss(model.forward(features).embedding, teacher_embedding, bank, 0.5);
          };
          break;
        default:
          make_loss = [&] {
            ForwardResult f = model.forward(features);
            Tensor sup = cross_entropy_loss(f.logits, labels);
            Tensor kd = kd_kl_loss(f.logits, teacher_logits, 2.0);
            Tensor rrd = rrd_loss(f.embedding, teacher_embedding, bank, 0.5, 0.2,
                                  RrdMode::kEnqueueFirst);
            return combined_objective(sup, kd, rrd, 0.9, 1.5);
          };
          break;
      }

      const double err = finite_difference_check(make_loss, model.parameter_tensors(), 1e-5);
      report.cases[c].max_rel_error = std::max(report.cases[c].max_rel_error, err);
      report.max_rel_error = std::max(report.max_rel_error, err);
    }
  }
  return report;
}

}  // namespace rrd
