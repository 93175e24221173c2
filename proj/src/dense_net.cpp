#include "ddn/dense_net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddn {

dense_net::dense_net(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("dense_net: need input and output sizes");
  for (auto s : sizes_) {
    if (s == 0) throw std::invalid_argument("dense_net: zero-width layer");
  }
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(off);
    off += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(off, 0.0);
}

void dense_net::init(rng& gen) {
  const std::size_t nl = sizes_.size() - 1;
  for (std::size_t l = 0; l < nl; ++l) {
    const double fan_in = static_cast<double>(sizes_[l]);
    const double fan_out = static_cast<double>(sizes_[l + 1]);
    const bool last = (l + 1 == nl);
    const double sd = last ? std::sqrt(2.0 / (fan_in + fan_out)) : std::sqrt(2.0 / fan_in);
    const std::size_t w0 = weight_offset(l);
    const std::size_t nw = sizes_[l] * sizes_[l + 1];
    for (std::size_t k = 0; k < nw; ++k) params_[w0 + k] = sd * gen.normal();
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(bias_offset(l)), sizes_[l + 1], 0.0);
  }
}

bool dense_net::is_bias(std::size_t k) const {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const std::size_t b0 = bias_offset(l);
    if (k >= b0 && k < b0 + sizes_[l + 1]) return true;
  }
  return false;
}

void dense_net::forward(std::span<const double> input, cache& c) const {
  if (input.size() != input_dim()) throw std::invalid_argument("dense_net: input dimension mismatch");
  const std::size_t nl = sizes_.size() - 1;
  c.activations.resize(nl + 1);
  c.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < nl; ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    const vec& a = c.activations[l];
    vec& z = c.activations[l + 1];
    z.resize(out);
    const bool hidden = (l + 1 < nl);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += row[i] * a[i];
      z[o] = (hidden && s < 0.0) ? 0.0 : s;
    }
  }
}

vec dense_net::logits(std::span<const double> input) const {
  cache c;
  forward(input, c);
  return std::move(c.activations.back());
}

void dense_net::backward(const cache& c, std::span<const double> dlogits, std::span<double> param_grad,
                         std::span<double> input_grad) const {
  const std::size_t nl = sizes_.size() - 1;
  if (dlogits.size() != output_dim() || param_grad.size() != params_.size()) {
    throw std::invalid_argument("dense_net::backward: size mismatch");
  }
  vec delta(dlogits.begin(), dlogits.end());
  vec prev;
  for (std::size_t l = nl; l-- > 0;) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    double* gw = param_grad.data() + weight_offset(l);
    double* gb = param_grad.data() + bias_offset(l);
    const vec& a = c.activations[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * a[i];
    }
    if (l == 0 && input_grad.empty()) break;
    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += d * row[i];
    }
    if (l > 0) {
      // ReLU derivative; activations[l] is post-ReLU so zero means inactive.
      for (std::size_t i = 0; i < in; ++i) {
        if (a[i] <= 0.0) prev[i] = 0.0;
      }
    } else {
      std::copy(prev.begin(), prev.end(), input_grad.begin());
    }
    delta.swap(prev);
  }
}

}  // namespace ddn
