#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ddn/numeric.hpp"

namespace ddn {

/// Fully connected network with ReLU hidden layers and a linear output layer
/// (callers apply the sigmoid). Zero hidden layers gives logistic regression.
///
/// Parameters are stored flat, layer by layer, each layer as its weight
/// matrix (row-major, out x in) followed by its bias vector.
class dense_net {
 public:
  struct cache {
    // activations[0] is the input, activations[L] the output logits.
    std::vector<vec> activations;
  };

  dense_net() = default;
  /// sizes = {input, hidden..., output}; at least two entries.
  explicit dense_net(std::vector<std::size_t> sizes);

  /// He-normal weights for ReLU layers, Glorot-normal for the output layer,
  /// zero biases.
  void init(rng& gen);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t hidden_layers() const { return sizes_.size() - 2; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  std::size_t param_count() const { return params_.size(); }
  const vec& params() const { return params_; }
  vec& params() { return params_; }
  /// True for entries of `params()` that are biases.
  bool is_bias(std::size_t k) const;

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }
  double& weight(std::size_t layer, std::size_t out, std::size_t in) {
    return params_[weight_offset(layer) + out * sizes_[layer] + in];
  }
  double& bias(std::size_t layer, std::size_t out) { return params_[bias_offset(layer) + out]; }

  void forward(std::span<const double> input, cache& c) const;
  vec logits(std::span<const double> input) const;

  /// Accumulates dL/dparams into param_grad given dL/dlogits. When input_grad
  /// is non-empty it receives (overwrites) dL/dinput.
  void backward(const cache& c, std::span<const double> dlogits, std::span<double> param_grad,
                std::span<double> input_grad = {}) const;

  friend bool operator==(const dense_net&, const dense_net&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  vec params_;
};

}  // namespace ddn
