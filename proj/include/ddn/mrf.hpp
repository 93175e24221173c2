#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ddn/numeric.hpp"
#include "ddn/sgd.hpp"

namespace ddn {

/// Row-major table of 0/1 values.
struct binary_matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  binary_matrix() = default;
  binary_matrix(std::size_t r, std::size_t c) : rows(r), cols(c), bits(r * c, 0) {}

  std::span<const std::uint8_t> row(std::size_t i) const { return {bits.data() + i * cols, cols}; }
  std::span<std::uint8_t> row(std::size_t i) { return {bits.data() + i * cols, cols}; }
  std::uint8_t& at(std::size_t i, std::size_t j) { return bits[i * cols + j]; }
  std::uint8_t at(std::size_t i, std::size_t j) const { return bits[i * cols + j]; }
};

/// Indicator feature over one node or the conjunction of two nodes.
struct mrf_feature {
  static constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::size_t a = 0;
  std::size_t b = none;

  bool is_pair() const { return b != none; }
  friend bool operator==(const mrf_feature&, const mrf_feature&) = default;
};

using edge = std::pair<std::size_t, std::size_t>;

/// Log-linear model over binary nodes: P(y) proportional to exp(sum_k w_k f_k(y)).
///
/// Nodes [0, n_x) are labels and [n_x, n_x + n_e) are evidence. Every feature
/// is true iff all of its nodes are 1.
class pairwise_mrf {
 public:
  pairwise_mrf() = default;
  pairwise_mrf(std::size_t n_x, std::size_t n_e, std::size_t neighbor_cap = 10);

  std::size_t n_x() const { return n_x_; }
  std::size_t n_e() const { return n_e_; }
  std::size_t node_count() const { return n_x_ + n_e_; }
  std::size_t neighbor_cap() const { return neighbor_cap_; }

  std::size_t add_unary(std::size_t node, double weight);
  /// Throws if either endpoint would exceed the neighbor cap or the pair
  /// already exists.
  std::size_t add_pair(std::size_t a, std::size_t b, double weight);

  const std::vector<mrf_feature>& features() const { return features_; }
  const vec& weights() const { return weights_; }
  vec& weights() { return weights_; }
  std::size_t feature_count() const { return features_.size(); }

  /// Feature indices touching node j.
  const std::vector<std::size_t>& incident(std::size_t j) const { return incident_[j]; }
  const std::vector<std::size_t>& neighbors(std::size_t j) const { return neighbors_[j]; }
  std::vector<edge> edges() const;

  /// Sum of w_k f_k over a full node assignment.
  double score(std::span<const std::uint8_t> state) const;
  /// log P(y_j = 1 | rest) - log P(y_j = 0 | rest).
  double conditional_logit(std::size_t j, std::span<const std::uint8_t> state) const;

  friend bool operator==(const pairwise_mrf&, const pairwise_mrf&) = default;

 private:
  void check_node(std::size_t j) const;

  std::size_t n_x_ = 0;
  std::size_t n_e_ = 0;
  std::size_t neighbor_cap_ = 10;
  std::vector<mrf_feature> features_;
  vec weights_;
  std::vector<std::vector<std::size_t>> incident_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// The model with evidence clamped: a pairwise score over label nodes only.
struct conditioned_model {
  std::size_t n = 0;
  double constant = 0.0;
  vec unary;
  struct pair_term {
    std::size_t i, j;
    double w;
  };
  std::vector<pair_term> pairs;

  double score(std::span<const std::uint8_t> x) const;
};

conditioned_model condition_on_evidence(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence);

// ---------------------------------------------------------------------------
// Structure learning

struct structure_config {
  /// Candidate l1 strengths, tried in increasing order per node. Empty means
  /// default_lambda_schedule for the data's shape.
  vec lambda_schedule;
  std::size_t neighbor_cap = 10;
  std::size_t max_iters = 500;
  double tol = 1e-7;

  /// Doubling from max(0.001, sqrt(ln(cols) / rows)) up to 10.
  static vec default_lambda_schedule(std::size_t rows, std::size_t cols);
};

struct structure_result {
  std::vector<edge> edges;
  /// Strength used per node (the schedule value at which its cap held).
  vec node_lambda;
  std::vector<std::string> warnings;
};

/// l1-regularised logistic regression of one binary column on the others.
/// Returns {bias, weights over the other columns in ascending order}.
struct l1_logistic_fit {
  double bias = 0.0;
  vec weights;
};
l1_logistic_fit fit_l1_logistic(const binary_matrix& data, std::size_t target, double lambda,
                                std::size_t max_iters, double tol, const l1_logistic_fit* warm = nullptr);

structure_result learn_structure(const binary_matrix& data, const structure_config& cfg);

/// Singleton feature on every node plus one conjunctive feature per edge, all
/// weights zero.
pairwise_mrf mrf_from_structure(std::size_t n_x, std::size_t n_e, const std::vector<edge>& edges,
                                std::size_t neighbor_cap);

// ---------------------------------------------------------------------------
// Pseudo-likelihood learning

/// Mean over rows of sum_j log P(y_j | y_-j), minus (l2/2)||w||^2.
double pll(const pairwise_mrf& mrf, const binary_matrix& data, double l2 = 0.0);
vec pll_grad(const pairwise_mrf& mrf, const binary_matrix& data, double l2 = 0.0);

struct weight_fit_result {
  pairwise_mrf mrf;
  double final_pll = 0.0;
  vec epoch_pll;
};

/// Mini-batch SGD ascent on pll with cfg.l2. Throws numeric_error on divergence.
weight_fit_result fit_weights(const pairwise_mrf& mrf, const binary_matrix& data, const sgd_config& cfg);

// ---------------------------------------------------------------------------
// Inference

enum class inference_method { gibbs, bp, exact, map };

std::string to_string(inference_method m);

struct marginal_estimates {
  vec p;
  inference_method method = inference_method::exact;
  std::size_t iterations = 0;
  double wall_ms = 0.0;
  bool hit_time_budget = false;
  /// BP only: final max message change.
  double residual = 0.0;
};

struct map_result {
  std::vector<std::uint8_t> assignment;
  double score = 0.0;
  bool exact = false;
};

using millis = std::chrono::milliseconds;

struct gibbs_config {
  std::size_t n_samples = 50000;
  std::size_t burn_in = 0;
  millis time_budget{60000};
};

/// Single chain, fixed index-order sweeps over the label nodes, evidence
/// clamped. Marginals are the empirical means of post-burn-in states.
marginal_estimates gibbs_marginals(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence,
                                   const gibbs_config& cfg, rng& gen);

struct bp_config {
  std::size_t i_bound = 3;
  std::size_t max_iters = 1000;
  double damping = 0.5;
  double tol = 1e-10;
  millis time_budget{60000};
};

/// Cluster-graph (join-graph) propagation over mini-buckets.
marginal_estimates bp_marginals(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence,
                                const bp_config& cfg);

/// Greedy min-degree elimination order over the label interaction graph.
std::vector<std::size_t> min_degree_order(const conditioned_model& model);
/// Largest bucket scope minus one along `min_degree_order`. An i-bound of at
/// least induced_width + 1 makes the cluster graph a join tree.
std::size_t induced_width(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence);

/// Exact label marginals by enumeration; n_x <= 24.
marginal_estimates exact_marginals(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence);

enum class map_mode { exact, icm };

struct map_config {
  map_mode mode = map_mode::exact;
  millis time_budget{60000};
  /// icm only: restarts stop at this count or at the time budget.
  std::size_t max_restarts = 100;
};

inline constexpr std::size_t max_exact_map_labels = 25;

map_result map_assignment(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence,
                          const map_config& cfg, rng& gen);

struct drf_config {
  inference_method method = inference_method::gibbs;
  double tau_e = 0.5;
  gibbs_config gibbs;
  bp_config bp;
  map_config map;
};

struct drf_prediction {
  marginal_estimates marginals;
  std::optional<map_result> map;
};

/// evidence bit j = e_j > tau.
std::vector<std::uint8_t> binarize(std::span<const double> e, double tau);

/// Binarizes evidence, clamps it and runs the configured routine. MAP results
/// are reported as 0/1 marginals alongside the assignment.
drf_prediction drf_predict(const pairwise_mrf& mrf, std::span<const double> e_continuous,
                           const drf_config& cfg, rng& gen);

}  // namespace ddn
