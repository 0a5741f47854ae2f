// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rrd/tensor.hpp"

namespace rrd {

enum class Split { kTrain, kTest };

// Raw geometry of the generators, before the per-dimension standardization
// that every generated dataset goes through.
inline constexpr double kBlobRadius = 4.0;
inline constexpr double kSpiralInnerRadius = 0.5;
inline constexpr double kSpiralOuterRadius = 4.0;
// Total angle swept by one spiral arm.
inline constexpr double kSpiralTurns = 1.5;

struct Dataset {
  Tensor features;  // [n x dim], plain values
  std::vector<int> labels;
  int num_classes{0};
  std::vector<int64_t> train_indices;
  std::vector<int64_t> test_indices;

  int64_t size() const { return features.rows(); }
  int64_t dim() const { return features.cols(); }
  const std::vector<int64_t>& split_indices(Split split) const {
    return split == Split::kTrain ? train_indices : test_indices;
  }
  // Copies the given rows into a fresh feature tensor plus their labels.
  std::pair<Tensor, std::vector<int>> gather(const std::vector<int64_t>& indices) const;
};

struct Batch {
  Tensor features;
  std::vector<int> labels;
  std::vector<int64_t> indices;  // positions in the full dataset
};

// Gaussian blobs around class means. For dim >= 2 the means sit evenly on an
// origin-centered circle of radius kBlobRadius; for dim == 1 they form a
// lattice kBlobRadius * k. Features are then standardized per dimension.
// Exactly round(label_noise_fraction * n) samples are relabeled uniformly at
// random. The trailing test_fraction of each class's samples form the test
// split.
Dataset generate_blobs(int num_classes, int samples_per_class, int dim, double cluster_std,
                       double label_noise_fraction, uint64_t seed, double test_fraction = 0.25);

// Interleaved 2-D spiral arms (one per class) with angular offsets
// 2*pi*k/num_classes, radius growing from kSpiralInnerRadius to
// kSpiralOuterRadius, plus isotropic gaussian coordinate noise; standardized
// per dimension like the blobs.
Dataset generate_spirals(int num_classes, int samples_per_class, double noise, uint64_t seed,
                         double test_fraction = 0.25);

// Plain numeric CSV with a header row. label_column must hold non-negative
// integers; every other column becomes a feature in header order. The last
// round(test_fraction * n) rows (file order) form the test split.
Dataset load_csv_dataset(const std::string& path, const std::string& label_column,
                         double test_fraction = 0.25);

// Deterministic epoch batching: shuffles the split's indices with a generator
// seeded by mix_seed(shuffle_seed, epoch) and cuts them into batch_size chunks.
// A smaller final batch is kept, never dropped.
std::vector<Batch> batch_iterator(const Dataset& dataset, Split split, int64_t batch_size,
                                  uint64_t shuffle_seed, int64_t epoch);

}  // namespace rrd
