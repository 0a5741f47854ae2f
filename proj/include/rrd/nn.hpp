// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rrd/rng.hpp"
#include "rrd/tensor.hpp"

namespace rrd {

// Architecture description. layer_sizes[0] is the input dimension, the rest
// are backbone widths; the classifier and projection heads both hang off the
// last backbone layer.
struct ModelSpec {
  std::vector<int64_t> layer_sizes;
  int64_t num_classes{0};
  int64_t proj_dim{0};

  void validate() const;
  int64_t input_dim() const { return layer_sizes.front(); }
  int64_t backbone_dim() const { return layer_sizes.back(); }
  bool operator==(const ModelSpec&) const = default;
  std::string str() const;
};

struct LinearLayer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [1 x out], small uniform init

  // He-normal weights (std = sqrt(2 / in)), drawn row-major from rng.
  static LinearLayer init(int64_t in, int64_t out, Rng& rng, bool requires_grad = true);

  Tensor apply(const Tensor& x) const;
  int64_t in_dim() const { return weight.rows(); }
  int64_t out_dim() const { return weight.cols(); }
};

struct ForwardResult {
  Tensor logits;     // [n x num_classes]
  Tensor embedding;  // [n x proj_dim], rows unit-norm
  Tensor backbone;   // [n x backbone_dim], pre-head features
};

// MLP with a classification head and an L2-normalized projection head.
class Model {
 public:
  Model() = default;

  static Model init(const ModelSpec& spec, uint64_t seed);

  ForwardResult forward(const Tensor& input) const;

  // Stable name -> tensor pairs: backbone.<i>.{weight,bias}, classifier.*, projection.*
  std::vector<std::pair<std::string, Tensor>> parameters() const;
  std::vector<Tensor> parameter_tensors() const;

  // Frozen models take no gradients: requires_grad is cleared on every
  // parameter, so forward passes build no graph.
  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }

  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  std::vector<LinearLayer> backbone_;
  LinearLayer classifier_;
  LinearLayer projection_;
  bool frozen_{false};
};

}  // namespace rrd
