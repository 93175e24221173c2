#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ddn {

using vec = std::vector<double>;

/// Raised when a numerical routine produces or receives a non-finite value.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// xoshiro256** seeded through splitmix64.
///
/// The algorithm is fixed: the same seed yields the same stream in every
/// build. Instances are never shared between workers; derive a separate
/// stream per worker with `rng::derive`.
class rng {
 public:
  using result_type = std::uint64_t;

  explicit rng(std::uint64_t seed = 0);

  /// Independent stream for (seed, label, index).
  static rng derive(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }
  result_type operator()() { return next_u64(); }

 private:
  std::uint64_t s_[4];
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

double sigmoid(double z);
/// log(1 + exp(z)) without overflow.
double softplus(double z);
/// Binary cross-entropy of target t given logit z.
double bce_from_logit(double z, double t);

/// log(sum(exp(xs))). Throws std::invalid_argument on empty input.
double log_sum_exp(std::span<const double> xs);

bool all_finite(std::span<const double> xs);

/// Central-difference gradient of f at theta. Throws numeric_error naming the
/// coordinate if f is non-finite at either probe.
vec finite_diff_grad(const std::function<double(const vec&)>& f, const vec& theta, double h = 1e-5);

struct grad_check_report {
  double max_rel_err = 0.0;
  vec per_param_errors;
};

/// Per-coordinate error |a - n| / max(|a|, |n|, floor). Coordinates whose
/// gradients are both below `floor` are effectively compared absolutely.
grad_check_report compare_gradients(std::span<const double> analytic,
                                    std::span<const double> numeric,
                                    double floor = 1e-3);

double dot(std::span<const double> a, std::span<const double> b);
double norm_inf(std::span<const double> a);
double norm2_sq(std::span<const double> a);

/// Soft-thresholding operator sign(w) * max(|w| - t, 0).
inline double soft_threshold(double w, double t) {
  if (w > t) return w - t;
  if (w < -t) return w + t;
  return 0.0;
}

}  // namespace ddn
