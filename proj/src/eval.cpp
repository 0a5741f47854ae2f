// SPDX-License-Identifier: Apache-2.0
#include "rrd/eval.hpp"

#include <cmath>
#include <stdexcept>

#include "rrd/io_util.hpp"
#include "rrd/losses.hpp"

namespace rrd {

namespace {

// Forward in fixed-size chunks so huge datasets do not build one giant
// activation set. Row-level results are identical to a single-batch forward.
constexpr int64_t kForwardChunk = 512;

Tensor gather_rows(const Tensor& features, int64_t begin, int64_t end) {
  const int64_t d = features.cols();
  std::vector<double> out((end - begin) * d);
  std::copy_n(features.data().begin() + begin * d, (end - begin) * d, out.begin());
  return Tensor::from_data({end - begin, d}, std::move(out));
}

}  // namespace

double top1_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  if (!logits.defined()) throw std::invalid_argument("top1_accuracy: logits not defined");
  const int64_t n = logits.rows(), c = logits.cols();
  if (static_cast<int64_t>(labels.size()) != n) {
    throw std::invalid_argument("top1_accuracy: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " logit rows");
  }
  const auto& v = logits.data();
  int64_t correct = 0;
  for (int64_t i = 0; i < n; ++i) {
    int64_t best = 0;
    for (int64_t j = 1; j < c; ++j) {
      if (v[i * c + j] > v[i * c + best]) best = j;
    }
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

Tensor class_correlation_matrix(const Tensor& logits) {
  if (!logits.defined()) throw std::invalid_argument("class_correlation_matrix: not defined");
  const int64_t n = logits.rows(), c = logits.cols();
  if (n < 2) {
    throw std::invalid_argument("class_correlation_matrix needs at least 2 samples, got " +
                                std::to_string(n));
  }
  const auto& v = logits.data();
  std::vector<double> mean(c, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < c; ++j) mean[j] += v[i * c + j];
  }
  for (int64_t j = 0; j < c; ++j) mean[j] /= static_cast<double>(n);

  std::vector<double> cov(c * c, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t a = 0; a < c; ++a) {
      const double da = v[i * c + a] - mean[a];
      for (int64_t b = a; b < c; ++b) {
        cov[a * c + b] += da * (v[i * c + b] - mean[b]);
      }
    }
  }
  std::vector<double> sd(c);
  for (int64_t j = 0; j < c; ++j) {
    const double var = cov[j * c + j] / static_cast<double>(n);
    if (!(var > 0.0)) {
      throw std::domain_error("class_correlation_matrix: logits for class " + std::to_string(j) +
                              " have zero variance");
    }
    sd[j] = std::sqrt(var);
  }
  std::vector<double> corr(c * c);
  for (int64_t a = 0; a < c; ++a) {
    for (int64_t b = a; b < c; ++b) {
      const double r = (cov[a * c + b] / static_cast<double>(n)) / (sd[a] * sd[b]);
      corr[a * c + b] = r;
      corr[b * c + a] = r;
    }
  }
  return Tensor::from_data({c, c}, std::move(corr));
}

CorrelationDiff logit_correlation_difference(const Tensor& teacher_logits,
                                             const Tensor& student_logits) {
  if (!teacher_logits.defined() || !student_logits.defined()) {
    throw std::invalid_argument("logit_correlation_difference: logits not defined");
  }
  if (teacher_logits.shape() != student_logits.shape()) {
    throw std::invalid_argument("logit_correlation_difference: shapes " +
                                teacher_logits.shape().str() + " and " +
                                student_logits.shape().str() + " differ");
  }
  const Tensor tc = class_correlation_matrix(teacher_logits);
  const Tensor sc = class_correlation_matrix(student_logits);
  const int64_t c = tc.rows();
  std::vector<double> diff(c * c);
  double total = 0.0, mx = 0.0;
  for (int64_t i = 0; i < c * c; ++i) {
    diff[i] = tc.data()[i] - sc.data()[i];
    const double a = std::fabs(diff[i]);
    total += a;
    if (a > mx) mx = a;
  }
  CorrelationDiff out;
  out.difference = Tensor::from_data({c, c}, std::move(diff));
  out.mean_abs = total / static_cast<double>(c * c);
  out.max_abs = mx;
  return out;
}

namespace {

// Backbone features for the given rows, built without any graph.
Tensor encode_features(const Model& encoder, const Dataset& ds,
                       const std::vector<int64_t>& indices) {
  NoGradGuard guard;
  auto [x, labels] = ds.gather(indices);
  (void)labels;
  const int64_t n = x.rows();
  std::vector<double> out;
  out.reserve(n * encoder.spec().backbone_dim());
  for (int64_t begin = 0; begin < n; begin += kForwardChunk) {
    const int64_t end = std::min(n, begin + kForwardChunk);
    const Tensor chunk = gather_rows(x, begin, end);
    const Tensor h = encoder.forward(chunk).backbone;
    out.insert(out.end(), h.data().begin(), h.data().end());
  }
  return Tensor::from_data({n, encoder.spec().backbone_dim()}, std::move(out));
}

}  // namespace

double linear_probe_accuracy(const Model& encoder, const Dataset& transfer,
                             const ProbeConfig& config) {
  if (!encoder.frozen()) {
    throw std::invalid_argument("linear_probe_accuracy: encoder must be frozen");
  }
  if (config.steps < 1) {
    throw std::invalid_argument("linear_probe_accuracy: steps must be positive, got " +
                                std::to_string(config.steps));
  }
  if (!(config.learning_rate > 0.0)) {
    throw std::invalid_argument("linear_probe_accuracy: learning_rate must be positive");
  }
  if (transfer.train_indices.empty() || transfer.test_indices.empty()) {
    throw std::invalid_argument("linear_probe_accuracy: transfer dataset needs both splits");
  }

  const Tensor train_x = encode_features(encoder, transfer, transfer.train_indices);
  const Tensor test_x = encode_features(encoder, transfer, transfer.test_indices);
  std::vector<int> train_y, test_y;
  for (int64_t i : transfer.train_indices) train_y.push_back(transfer.labels[i]);
  for (int64_t i : transfer.test_indices) test_y.push_back(transfer.labels[i]);

  Rng rng(config.seed);
  LinearLayer probe =
      LinearLayer::init(encoder.spec().backbone_dim(), transfer.num_classes, rng);
  std::vector<Tensor> params{probe.weight, probe.bias};

  for (int64_t step = 0; step < config.steps; ++step) {
    Tensor loss = cross_entropy_loss(probe.apply(train_x), train_y);
    for (Tensor& p : params) p.zero_grad();
    loss.backward();
    for (Tensor& p : params) {
      const auto& g = p.grad();
      auto& d = p.data();
      for (size_t i = 0; i < d.size(); ++i) d[i] -= config.learning_rate * g[i];
    }
  }

  NoGradGuard guard;
  return top1_accuracy(probe.apply(test_x), test_y);
}

void export_embeddings_csv(const Model& model, const Dataset& dataset, const std::string& path) {
  NoGradGuard guard;
  const int64_t n = dataset.size();
  const int64_t d = model.spec().proj_dim;
  std::string csv = "sample_index,label";
  for (int64_t j = 0; j < d; ++j) csv += ",e_" + std::to_string(j);
  csv += "\n";
  for (int64_t begin = 0; begin < n; begin += kForwardChunk) {
    const int64_t end = std::min(n, begin + kForwardChunk);
    const Tensor chunk = gather_rows(dataset.features, begin, end);
    const Tensor emb = model.forward(chunk).embedding;
    for (int64_t i = 0; i < end - begin; ++i) {
      csv += std::to_string(begin + i) + "," + std::to_string(dataset.labels[begin + i]);
      for (int64_t j = 0; j < d; ++j) {
        csv += "," + format_double(emb.data()[i * d + j]);
      }
      csv += "\n";
    }
  }
  write_file_atomic(path, csv);
}

void write_matrix_csv(const Tensor& matrix, const std::string& path) {
  const int64_t rows = matrix.rows(), cols = matrix.cols();
  std::string csv;
  for (int64_t j = 0; j < cols; ++j) {
    csv += (j ? ",c_" : "c_") + std::to_string(j);
  }
  csv += "\n";
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < cols; ++j) {
      if (j) csv += ",";
      csv += format_double(matrix.data()[i * cols + j]);
    }
    csv += "\n";
  }
  write_file_atomic(path, csv);
}

}  // namespace rrd
