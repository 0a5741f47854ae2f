// SPDX-License-Identifier: Apache-2.0
#include "rrd/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace rrd {

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument(
        "model spec needs at least an input dimension and one backbone layer, got " +
        std::to_string(layer_sizes.size()) + " entries");
  }
  for (size_t i = 0; i < layer_sizes.size(); ++i) {
    if (layer_sizes[i] < 1) {
      throw std::invalid_argument("model spec layer_sizes[" + std::to_string(i) +
                                  "] must be positive, got " + std::to_string(layer_sizes[i]));
    }
  }
  if (num_classes < 2) {
    throw std::invalid_argument("model spec num_classes must be at least 2, got " +
                                std::to_string(num_classes));
  }
  if (proj_dim < 1) {
    throw std::invalid_argument("model spec proj_dim must be positive, got " +
                                std::to_string(proj_dim));
  }
}

std::string ModelSpec::str() const {
  std::string s = "[";
  for (size_t i = 0; i < layer_sizes.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(layer_sizes[i]);
  }
  s += "] classes=" + std::to_string(num_classes) + " proj=" + std::to_string(proj_dim);
  return s;
}

LinearLayer LinearLayer::init(int64_t in, int64_t out, Rng& rng, bool requires_grad) {
  if (in < 1 || out < 1) {
    throw std::invalid_argument("linear layer dimensions must be positive, got " +
                                std::to_string(in) + "x" + std::to_string(out));
  }
  const double stddev = std::sqrt(2.0 / static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& v : w) v = stddev * rng.next_gaussian();
  // Small uniform bias init keeps a row whose units are all inactive away from
  // the exact zero vector, which the embedding normalization cannot accept.
  const double bias_bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::vector<double> b(out);
  for (auto& v : b) v = bias_bound * (2.0 * rng.next_double() - 1.0);
  LinearLayer layer;
  layer.weight = Tensor::from_data({in, out}, std::move(w), requires_grad);
  layer.bias = Tensor::from_data({1, out}, std::move(b), requires_grad);
  return layer;
}

Tensor LinearLayer::apply(const Tensor& x) const {
  return add_row_broadcast(matmul(x, weight), bias);
}

Model Model::init(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  Model m;
  m.spec_ = spec;
  Rng rng(seed);
  for (size_t i = 0; i + 1 < spec.layer_sizes.size(); ++i) {
    m.backbone_.push_back(LinearLayer::init(spec.layer_sizes[i], spec.layer_sizes[i + 1], rng));
  }
  m.classifier_ = LinearLayer::init(spec.backbone_dim(), spec.num_classes, rng);
  m.projection_ = LinearLayer::init(spec.backbone_dim(), spec.proj_dim, rng);
  return m;
}

ForwardResult Model::forward(const Tensor& input) const {
  if (backbone_.empty()) throw std::logic_error("forward on an uninitialized model");
  if (input.cols() != spec_.input_dim()) {
    throw std::invalid_argument("model expects input dimension " +
                                std::to_string(spec_.input_dim()) + ", got shape " +
                                input.shape().str());
  }
  Tensor h = input;
  for (const LinearLayer& layer : backbone_) {
    h = relu(layer.apply(h));
  }
  ForwardResult out;
  out.backbone = h;
  out.logits = classifier_.apply(h);
  out.embedding = row_l2_normalize(projection_.apply(h));
  return out;
}

std::vector<std::pair<std::string, Tensor>> Model::parameters() const {
  std::vector<std::pair<std::string, Tensor>> params;
  for (size_t i = 0; i < backbone_.size(); ++i) {
    params.emplace_back("backbone." + std::to_string(i) + ".weight", backbone_[i].weight);
    params.emplace_back("backbone." + std::to_string(i) + ".bias", backbone_[i].bias);
  }
  params.emplace_back("classifier.weight", classifier_.weight);
  params.emplace_back("classifier.bias", classifier_.bias);
  params.emplace_back("projection.weight", projection_.weight);
  params.emplace_back("projection.bias", projection_.bias);
  return params;
}

std::vector<Tensor> Model::parameter_tensors() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : parameters()) out.push_back(t);
  return out;
}

void Model::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (Tensor& t : parameter_tensors()) t.set_requires_grad(!frozen);
}

}  // namespace rrd
