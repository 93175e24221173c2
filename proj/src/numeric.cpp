#include "ddn/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace ddn {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// FNV-1a, used only to fold stream labels into a seed.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

rng::rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& w : s_) w = splitmix64(sm);
}

rng rng::derive(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  std::uint64_t st = seed;
  std::uint64_t a = splitmix64(st);
  st = a ^ fnv1a(label);
  std::uint64_t b = splitmix64(st);
  st = b ^ (index * 0xd1b54a32d192ed03ULL);
  return rng(splitmix64(st));
}

std::uint64_t rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::uint64_t rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("rng::uniform_int: n must be positive");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(a);
  has_spare_normal_ = true;
  return r * std::cos(a);
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double bce_from_logit(double z, double t) {
  // -[t log s(z) + (1-t) log(1-s(z))] = t*softplus(-z) + (1-t)*softplus(z)
  return t * softplus(-z) + (1.0 - t) * softplus(z);
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  if (xs.size() == 1) return xs[0];
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

vec finite_diff_grad(const std::function<double(const vec&)>& f, const vec& theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  vec g(theta.size());
  vec probe = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    probe[k] = theta[k] + h;
    const double fp = f(probe);
    probe[k] = theta[k] - h;
    const double fm = f(probe);
    probe[k] = theta[k];
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw numeric_error("finite_diff_grad: non-finite objective at coordinate " + std::to_string(k));
    }
    g[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

grad_check_report compare_gradients(std::span<const double> analytic, std::span<const double> numeric,
                                    double floor) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("compare_gradients: size mismatch");
  }
  grad_check_report rep;
  rep.per_param_errors.resize(analytic.size());
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
    const double e = std::abs(analytic[k] - numeric[k]) / denom;
    rep.per_param_errors[k] = e;
    rep.max_rel_err = std::max(rep.max_rel_err, e);
  }
  return rep;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

double norm2_sq(std::span<const double> a) { return dot(a, a); }

}  // namespace ddn
