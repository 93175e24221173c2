#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddn/dense_net.hpp"
#include "ddn/mrf.hpp"
#include "ddn/numeric.hpp"
#include "ddn/sgd.hpp"

namespace ddn {

enum class classifier_kind { lr, mlp };

std::string to_string(classifier_kind k);

/// Thrown when one or more learners diverge; `failed` lists their indices.
class training_error : public numeric_error {
 public:
  training_error(const std::string& what, std::vector<std::size_t> failed)
      : numeric_error(what), failed_(std::move(failed)) {}
  const std::vector<std::size_t>& failed() const { return failed_; }

 private:
  std::vector<std::size_t> failed_;
};

/// Probabilistic binary classifier: logistic regression (l1) or an MLP with
/// ReLU hidden layers and a sigmoid output (l2).
class conditional_classifier {
 public:
  conditional_classifier() = default;
  conditional_classifier(classifier_kind kind, dense_net net, double reg);

  static conditional_classifier make_lr(std::size_t input_dim, double l1 = 0.01);
  static conditional_classifier make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden, double l2,
                                         rng& gen);

  classifier_kind kind() const { return kind_; }
  double reg() const { return reg_; }
  void set_reg(double r) { reg_ = r; }
  std::size_t input_dim() const { return net_.input_dim(); }
  const dense_net& net() const { return net_; }
  dense_net& net() { return net_; }

  double logit(std::span<const double> input) const;
  double prob(std::span<const double> input) const { return sigmoid(logit(input)); }

  /// Penalty value: l1 * |w|_1 (lr) or (l2/2) * |w|^2 (mlp), biases excluded.
  double penalty() const;
  /// Cross-entropy of target given input, optionally with the penalty.
  double loss(std::span<const double> input, double target, bool with_penalty = false) const;

  struct gradient {
    double loss = 0.0;
    double p = 0.0;
    vec params;
    vec input;
  };
  /// Analytic gradient of the cross-entropy w.r.t. parameters and input. With
  /// `with_penalty`, adds l2 * w (mlp) or the subgradient l1 * sign(w) (lr).
  gradient cross_entropy_grad(std::span<const double> input, double target, bool with_penalty = false) const;

  friend bool operator==(const conditional_classifier&, const conditional_classifier&) = default;

 private:
  classifier_kind kind_ = classifier_kind::lr;
  dense_net net_;
  double reg_ = 0.0;
};

/// n per-label classifiers P_i(x_i | e, x_-i). Classifier inputs are laid out
/// as [e || x_-i] with the labels in ascending index order, skipping i.
struct conditional_dn {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<conditional_classifier> classifiers;

  classifier_kind kind() const { return classifiers.empty() ? classifier_kind::lr : classifiers.front().kind(); }

  /// Default MLP hidden widths: four layers of max(2(m + n), 64).
  static std::vector<std::size_t> default_hidden(std::size_t m, std::size_t n);

  static conditional_dn make_lr(std::size_t n, std::size_t m, double l1 = 0.01);
  static conditional_dn make_mlp(std::size_t n, std::size_t m, const std::vector<std::size_t>& hidden, double l2,
                                 std::uint64_t seed);

  void validate() const;

  /// Writes [e || x_-i] into buf (resized to m + n - 1). `x` is the full label
  /// vector; x[i] is ignored.
  void build_input(std::size_t i, std::span<const double> e, std::span<const std::uint8_t> x, vec& buf) const;

  /// P_i(x_i = 1 | e, x_-i) with x_minus_i of length n - 1.
  double conditional(std::size_t i, std::span<const double> e, std::span<const std::uint8_t> x_minus_i) const;
  /// Same, reading x_-i from a full label vector.
  double conditional_full(std::size_t i, std::span<const double> e, std::span<const std::uint8_t> x) const;

  friend bool operator==(const conditional_dn&, const conditional_dn&) = default;
};

/// Evidence vectors paired with label rows.
struct labeled_features {
  std::vector<vec> e;
  binary_matrix x;

  std::size_t size() const { return e.size(); }
};

struct pipeline_result {
  conditional_dn dn;
  /// Per classifier, mean cross-entropy over each epoch.
  std::vector<vec> epoch_loss;
};

/// Trains every classifier independently on teacher-forced inputs [e || x_-i].
/// LR applies a proximal l1 step after each update; MLP uses l2 weight decay.
/// Classifier i draws its shuffles from stream (seed, "dn-pipeline", i), so the
/// result does not depend on `jobs`.
pipeline_result train_pipeline(const conditional_dn& dn, const labeled_features& data, const sgd_config& cfg,
                               std::size_t jobs = 1);

}  // namespace ddn
