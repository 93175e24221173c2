#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ddn/dataset.hpp"
#include "ddn/dense_net.hpp"
#include "ddn/dn_head.hpp"
#include "ddn/mrf.hpp"
#include "ddn/sgd.hpp"

namespace ddn {

/// Feature extractor v -> e with ReLU hidden layers and sigmoid outputs.
struct backbone {
  dense_net net;

  static backbone make(std::size_t d, const std::vector<std::size_t>& hidden, std::size_t m, std::uint64_t seed);
  /// One hidden layer of width 4 * max(d, n).
  static std::vector<std::size_t> default_hidden(std::size_t d, std::size_t n);

  std::size_t input_dim() const { return net.input_dim(); }
  std::size_t output_dim() const { return net.output_dim(); }
  vec forward(std::span<const double> v) const;
  std::vector<vec> forward_all(const dataset& data) const;

  friend bool operator==(const backbone&, const backbone&) = default;
};

struct train_result_backbone {
  backbone model;
  vec epoch_loss;
};

/// Minimises the mean per-label cross-entropy between e = N(v) and x.
/// Requires output_dim == n. cfg.l2 is applied as weight decay.
train_result_backbone pretrain_backbone(const backbone& init, const dataset& data, const sgd_config& cfg);

/// Backbone parameters (Pi) paired with a conditional DN head (Gamma).
struct deep_dependency_network {
  backbone bb;
  conditional_dn head;

  void validate() const;
  friend bool operator==(const deep_dependency_network&, const deep_dependency_network&) = default;
};

/// -sum_i log P_i(x_i | e = N(v), x_-i).
double cpll_loss(const deep_dependency_network& model, std::span<const double> v, std::span<const std::uint8_t> x);
/// Mean CPLL over a dataset.
double mean_cpll(const deep_dependency_network& model, const dataset& data);

struct cpll_gradient {
  double loss = 0.0;
  vec backbone;
  std::vector<vec> head;
};

/// Gradient of the summed CPLL over `batch` (no regularisation). The backbone
/// part accumulates every conditional's input gradient on the e block.
cpll_gradient cpll_grad(const deep_dependency_network& model, std::span<const example> batch);

struct train_result_joint {
  deep_dependency_network model;
  /// Mean training CPLL after each epoch.
  vec epoch_loss;
};

inline constexpr double joint_rate_min = 1e-5;
inline constexpr double joint_rate_max = 1e-3;

/// Mini-batch SGD on the mean CPLL over both parameter sets. The initial rate
/// must lie in [joint_rate_min, joint_rate_max]. Head regularisation follows
/// each classifier's kind (proximal l1 or l2 decay); cfg.l2 decays the
/// backbone.
train_result_joint train_joint(const deep_dependency_network& init, const dataset& data, const sgd_config& cfg);

struct ddn_inference_config {
  std::size_t n_samples = 1000;
  std::size_t burn_in = 0;
};

/// Samples and conditionals recorded by `infer`.
struct gibbs_trace {
  /// Not touched by `infer`; callers record the seed they used.
  std::uint64_t seed = 0;
  std::vector<std::vector<std::uint8_t>> samples;
  std::vector<std::vector<std::size_t>> permutations;
  /// conditionals[j][i] = P_i(x_i = 1 | x_-i^(j), e).
  std::vector<vec> conditionals;
};

/// Random-scan Gibbs over the head given fixed evidence: random initial
/// labels, a fresh permutation per sweep, and the mixture estimator
/// p_i = (1/N) sum_j P_i(x_i = 1 | x_-i^(j), e) over end-of-sweep states.
marginal_estimates infer_from_evidence(const conditional_dn& head, std::span<const double> e,
                                       const ddn_inference_config& cfg, rng& gen, gibbs_trace* trace = nullptr);

/// e = N(v), then `infer_from_evidence`.
marginal_estimates infer(const deep_dependency_network& model, std::span<const double> v,
                         const ddn_inference_config& cfg, rng& gen, gibbs_trace* trace = nullptr);

/// x_i = 1 iff p_i > threshold.
std::vector<std::uint8_t> predict_labels(const marginal_estimates& est, double threshold);
std::vector<std::uint8_t> predict_labels(std::span<const double> p, double threshold);

}  // namespace ddn
