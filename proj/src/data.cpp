// SPDX-License-Identifier: Apache-2.0
#include "rrd/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rrd/errors.hpp"
#include "rrd/rng.hpp"

namespace rrd {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Distinct substream tags for the independent random decisions inside one
// generator seed.
constexpr uint64_t kFeatureStream = 0;
constexpr uint64_t kNoiseStream = 1;

void check_generator_args(int num_classes, int samples_per_class, double test_fraction) {
  if (num_classes < 1) {
    throw std::invalid_argument("generator num_classes must be positive, got " +
                                std::to_string(num_classes));
  }
  if (samples_per_class < 1) {
    throw std::invalid_argument("generator samples_per_class must be positive, got " +
                                std::to_string(samples_per_class));
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("generator test_fraction must be in [0, 1), got " +
                                std::to_string(test_fraction));
  }
}

// Stratified split: within each class block the trailing samples go to test.
void split_per_class(Dataset& ds, int num_classes, int samples_per_class, double test_fraction) {
  const int64_t test_per_class = llround(test_fraction * samples_per_class);
  for (int k = 0; k < num_classes; ++k) {
    const int64_t base = static_cast<int64_t>(k) * samples_per_class;
    for (int64_t s = 0; s < samples_per_class; ++s) {
      if (s < samples_per_class - test_per_class) {
        ds.train_indices.push_back(base + s);
      } else {
        ds.test_indices.push_back(base + s);
      }
    }
  }
}

void apply_label_noise(Dataset& ds, double fraction, uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("label_noise_fraction must be in [0, 1], got " +
                                std::to_string(fraction));
  }
  const int64_t n = static_cast<int64_t>(ds.labels.size());
  const int64_t noisy = llround(fraction * static_cast<double>(n));
  if (noisy == 0) return;
  Rng rng(seed);
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  for (int64_t i = 0; i < noisy; ++i) {
    ds.labels[order[i]] = static_cast<int>(rng.next_below(ds.num_classes));
  }
}

// Zero mean, unit variance per dimension, so generated datasets land on the
// scale the default learning rate and weight init expect. Dimensions with no
// spread are only centered.
void standardize_features(std::vector<double>& features, int64_t n, int64_t dim) {
  for (int64_t j = 0; j < dim; ++j) {
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += features[i * dim + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double d = features[i * dim + j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    if (sd > 1e-12) {
      const double inv = 1.0 / sd;
      for (int64_t i = 0; i < n; ++i) {
        features[i * dim + j] = (features[i * dim + j] - mean) * inv;
      }
    } else {
      for (int64_t i = 0; i < n; ++i) features[i * dim + j] -= mean;
    }
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim surrounding whitespace
    const auto begin = field.find_first_not_of(" \t\r");
    const auto end = field.find_last_not_of(" \t\r");
    fields.push_back(begin == std::string::npos ? "" : field.substr(begin, end - begin + 1));
  }
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace

std::pair<Tensor, std::vector<int>> Dataset::gather(const std::vector<int64_t>& indices) const {
  if (indices.empty()) throw std::invalid_argument("gather: empty index list");
  const int64_t d = dim();
  const auto& src = features.data();
  std::vector<double> out(indices.size() * d);
  std::vector<int> out_labels(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) {
    const int64_t idx = indices[i];
    if (idx < 0 || idx >= size()) {
      throw std::out_of_range("gather: index " + std::to_string(idx) +
                              " out of range for dataset of " + std::to_string(size()));
    }
    std::copy_n(src.begin() + idx * d, d, out.begin() + static_cast<int64_t>(i) * d);
    out_labels[i] = labels[idx];
  }
  return {Tensor::from_data({static_cast<int64_t>(indices.size()), d}, std::move(out)),
          std::move(out_labels)};
}

Dataset generate_blobs(int num_classes, int samples_per_class, int dim, double cluster_std,
                       double label_noise_fraction, uint64_t seed, double test_fraction) {
  check_generator_args(num_classes, samples_per_class, test_fraction);
  if (dim < 1) throw std::invalid_argument("blobs dim must be positive, got " + std::to_string(dim));
  if (cluster_std < 0.0) {
    throw std::invalid_argument("blobs cluster_std must be non-negative, got " +
                                std::to_string(cluster_std));
  }

  std::vector<std::vector<double>> means(num_classes, std::vector<double>(dim, 0.0));
  for (int k = 0; k < num_classes; ++k) {
    if (dim == 1) {
      means[k][0] = kBlobRadius * k;
    } else {
      const double theta = 2.0 * kPi * k / num_classes;
      means[k][0] = kBlobRadius * std::cos(theta);
      means[k][1] = kBlobRadius * std::sin(theta);
    }
  }

  const int64_t n = static_cast<int64_t>(num_classes) * samples_per_class;
  std::vector<double> features(n * dim);
  Dataset ds;
  ds.labels.resize(n);
  ds.num_classes = num_classes;

  Rng rng(mix_seed(seed, kFeatureStream));
  for (int k = 0; k < num_classes; ++k) {
    for (int s = 0; s < samples_per_class; ++s) {
      const int64_t idx = static_cast<int64_t>(k) * samples_per_class + s;
      for (int j = 0; j < dim; ++j) {
        features[idx * dim + j] = means[k][j] + cluster_std * rng.next_gaussian();
      }
      ds.labels[idx] = k;
    }
  }
  standardize_features(features, n, dim);
  ds.features = Tensor::from_data({n, dim}, std::move(features));
  apply_label_noise(ds, label_noise_fraction, mix_seed(seed, kNoiseStream));
  split_per_class(ds, num_classes, samples_per_class, test_fraction);
  return ds;
}

Dataset generate_spirals(int num_classes, int samples_per_class, double noise, uint64_t seed,
                         double test_fraction) {
  check_generator_args(num_classes, samples_per_class, test_fraction);
  if (noise < 0.0) {
    throw std::invalid_argument("spirals noise must be non-negative, got " +
                                std::to_string(noise));
  }

  const int64_t n = static_cast<int64_t>(num_classes) * samples_per_class;
  std::vector<double> features(n * 2);
  Dataset ds;
  ds.labels.resize(n);
  ds.num_classes = num_classes;

  Rng rng(mix_seed(seed, kFeatureStream));
  for (int k = 0; k < num_classes; ++k) {
    const double offset = 2.0 * kPi * k / num_classes;
    for (int s = 0; s < samples_per_class; ++s) {
      const int64_t idx = static_cast<int64_t>(k) * samples_per_class + s;
      const double t = static_cast<double>(s) / samples_per_class;
      const double r = kSpiralInnerRadius + (kSpiralOuterRadius - kSpiralInnerRadius) * t;
      const double theta = offset + kSpiralTurns * 2.0 * kPi * t;
      features[idx * 2 + 0] = r * std::cos(theta) + noise * rng.next_gaussian();
      features[idx * 2 + 1] = r * std::sin(theta) + noise * rng.next_gaussian();
      ds.labels[idx] = k;
    }
  }
  standardize_features(features, n, 2);
  ds.features = Tensor::from_data({n, 2}, std::move(features));
  split_per_class(ds, num_classes, samples_per_class, test_fraction);
  return ds;
}

Dataset load_csv_dataset(const std::string& path, const std::string& label_column,
                         double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("csv test_fraction must be in [0, 1), got " +
                                std::to_string(test_fraction));
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset file is empty: " + path);
  const std::vector<std::string> header = split_csv_line(line);
  int64_t label_col = -1;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) {
      label_col = static_cast<int64_t>(i);
      break;
    }
  }
  if (label_col < 0) {
    throw ConfigError("dataset file " + path + " has no column named '" + label_column + "'");
  }
  const int64_t dim = static_cast<int64_t>(header.size()) - 1;
  if (dim < 1) throw ConfigError("dataset file " + path + " has no feature columns");

  std::vector<double> features;
  std::vector<int> labels;
  int64_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ConfigError("dataset file " + path + " row " + std::to_string(row) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    for (size_t i = 0; i < fields.size(); ++i) {
      size_t consumed = 0;
      double v = 0.0;
      try {
        v = std::stod(fields[i], &consumed);
      } catch (const std::exception&) {
        throw ConfigError("dataset file " + path + " row " + std::to_string(row) + " column '" +
                          header[i] + "': cannot parse '" + fields[i] + "' as a number");
      }
      if (consumed != fields[i].size()) {
        throw ConfigError("dataset file " + path + " row " + std::to_string(row) + " column '" +
                          header[i] + "': trailing characters in '" + fields[i] + "'");
      }
      if (static_cast<int64_t>(i) == label_col) {
        if (v < 0.0 || v != std::floor(v)) {
          throw ConfigError("dataset file " + path + " row " + std::to_string(row) +
                            ": label '" + fields[i] + "' is not a non-negative integer");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        features.push_back(v);
      }
    }
  }
  if (labels.empty()) throw ConfigError("dataset file " + path + " has no data rows");

  Dataset ds;
  const int64_t n = static_cast<int64_t>(labels.size());
  ds.features = Tensor::from_data({n, dim}, std::move(features));
  ds.labels = std::move(labels);
  ds.num_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;

  const int64_t n_test = llround(test_fraction * static_cast<double>(n));
  for (int64_t i = 0; i < n; ++i) {
    if (i < n - n_test) {
      ds.train_indices.push_back(i);
    } else {
      ds.test_indices.push_back(i);
    }
  }
  return ds;
}

std::vector<Batch> batch_iterator(const Dataset& dataset, Split split, int64_t batch_size,
                                  uint64_t shuffle_seed, int64_t epoch) {
  if (batch_size < 1) {
    throw std::invalid_argument("batch_size must be positive, got " + std::to_string(batch_size));
  }
  const std::vector<int64_t>& base = dataset.split_indices(split);
  if (base.empty()) {
    throw std::invalid_argument(std::string("batch_iterator: ") +
                                (split == Split::kTrain ? "train" : "test") +
                                " split has no samples");
  }
  std::vector<int64_t> order = base;
  Rng rng(mix_seed(shuffle_seed, static_cast<uint64_t>(epoch)));
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (size_t start = 0; start < order.size(); start += batch_size) {
    const size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
    std::vector<int64_t> idx(order.begin() + start, order.begin() + end);
    auto [features, labels] = dataset.gather(idx);
    batches.push_back({std::move(features), std::move(labels), std::move(idx)});
  }
  return batches;
}

}  // namespace rrd
