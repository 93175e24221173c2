#include "ddn/dn_head.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

namespace ddn {

std::string to_string(classifier_kind k) { return k == classifier_kind::lr ? "lr" : "mlp"; }

conditional_classifier::conditional_classifier(classifier_kind kind, dense_net net, double reg)
    : kind_(kind), net_(std::move(net)), reg_(reg) {
  if (net_.output_dim() != 1) throw std::invalid_argument("conditional_classifier: network must have one output");
  if (kind_ == classifier_kind::lr && net_.hidden_layers() != 0) {
    throw std::invalid_argument("conditional_classifier: logistic regression has no hidden layers");
  }
}

conditional_classifier conditional_classifier::make_lr(std::size_t input_dim, double l1) {
  return {classifier_kind::lr, dense_net({input_dim, 1}), l1};
}

conditional_classifier conditional_classifier::make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                                        double l2, rng& gen) {
  if (hidden.empty()) throw std::invalid_argument("conditional_classifier: mlp needs hidden layers");
  std::vector<std::size_t> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  dense_net net(sizes);
  net.init(gen);
  return {classifier_kind::mlp, std::move(net), l2};
}

double conditional_classifier::logit(std::span<const double> input) const { return net_.logits(input)[0]; }

double conditional_classifier::penalty() const {
  const auto& p = net_.params();
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (net_.is_bias(k)) continue;
    s += kind_ == classifier_kind::lr ? std::abs(p[k]) : 0.5 * p[k] * p[k];
  }
  return reg_ * s;
}

double conditional_classifier::loss(std::span<const double> input, double target, bool with_penalty) const {
  const double l = bce_from_logit(logit(input), target);
  return with_penalty ? l + penalty() : l;
}

conditional_classifier::gradient conditional_classifier::cross_entropy_grad(std::span<const double> input,
                                                                            double target, bool with_penalty) const {
  dense_net::cache c;
  net_.forward(input, c);
  const double z = c.activations.back()[0];
  gradient g;
  g.p = sigmoid(z);
  g.loss = bce_from_logit(z, target);
  g.params.assign(net_.param_count(), 0.0);
  g.input.assign(input.size(), 0.0);
  const double dz = g.p - target;
  net_.backward(c, std::span<const double>(&dz, 1), g.params, g.input);
  if (with_penalty && reg_ != 0.0) {
    const auto& p = net_.params();
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (net_.is_bias(k)) continue;
      if (kind_ == classifier_kind::lr) {
        g.params[k] += reg_ * static_cast<double>((p[k] > 0.0) - (p[k] < 0.0));
      } else {
        g.params[k] += reg_ * p[k];
      }
    }
    g.loss += penalty();
  }
  return g;
}

std::vector<std::size_t> conditional_dn::default_hidden(std::size_t m, std::size_t n) {
  const std::size_t w = std::max<std::size_t>(2 * (m + n), 64);
  return {w, w, w, w};
}

conditional_dn conditional_dn::make_lr(std::size_t n, std::size_t m, double l1) {
  if (n == 0) throw std::invalid_argument("conditional_dn: need at least one label");
  conditional_dn dn{n, m, {}};
  for (std::size_t i = 0; i < n; ++i) dn.classifiers.push_back(conditional_classifier::make_lr(m + n - 1, l1));
  return dn;
}

conditional_dn conditional_dn::make_mlp(std::size_t n, std::size_t m, const std::vector<std::size_t>& hidden,
                                        double l2, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("conditional_dn: need at least one label");
  conditional_dn dn{n, m, {}};
  for (std::size_t i = 0; i < n; ++i) {
    rng gen = rng::derive(seed, "dn-init", i);
    dn.classifiers.push_back(conditional_classifier::make_mlp(m + n - 1, hidden, l2, gen));
  }
  return dn;
}

void conditional_dn::validate() const {
  if (classifiers.size() != n) throw std::invalid_argument("conditional_dn: classifier count differs from n");
  for (const auto& c : classifiers) {
    if (c.input_dim() != m + n - 1) throw std::invalid_argument("conditional_dn: classifier input dimension mismatch");
  }
}

void conditional_dn::build_input(std::size_t i, std::span<const double> e, std::span<const std::uint8_t> x,
                                 vec& buf) const {
  if (e.size() != m || x.size() != n) throw std::invalid_argument("conditional_dn: input dimension mismatch");
  buf.resize(m + n - 1);
  std::copy(e.begin(), e.end(), buf.begin());
  std::size_t k = m;
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) buf[k++] = x[j];
  }
}

double conditional_dn::conditional(std::size_t i, std::span<const double> e,
                                   std::span<const std::uint8_t> x_minus_i) const {
  if (i >= n) throw std::out_of_range("conditional_dn: label index out of range");
  if (e.size() != m || x_minus_i.size() + 1 != n) {
    throw std::invalid_argument("conditional_dn: expected |e| = " + std::to_string(m) + " and |x_-i| = " +
                                std::to_string(n - 1));
  }
  vec buf(m + n - 1);
  std::copy(e.begin(), e.end(), buf.begin());
  std::copy(x_minus_i.begin(), x_minus_i.end(), buf.begin() + static_cast<std::ptrdiff_t>(m));
  return classifiers[i].prob(buf);
}

double conditional_dn::conditional_full(std::size_t i, std::span<const double> e,
                                        std::span<const std::uint8_t> x) const {
  vec buf;
  build_input(i, e, x, buf);
  return classifiers[i].prob(buf);
}

namespace {

// Trains classifier i in place; returns per-epoch mean loss. Non-finite loss
// stops training early and is reported through the returned curve.
vec train_one(conditional_classifier& clf, const conditional_dn& shape, std::size_t i, const labeled_features& data,
              const sgd_config& cfg) {
  const std::size_t rows = data.size();
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  rng gen = rng::derive(cfg.seed, "dn-pipeline", i);
  dense_net& net = clf.net();
  const std::size_t np = net.param_count();
  vec velocity(np, 0.0);
  vec grad(np);
  vec input;
  vec curve;
  dense_net::cache cache;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    gen.shuffle(order);
    const double rate = cfg.rate_at(epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < rows; start += batch) {
      const std::size_t end = std::min(rows, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t q = start; q < end; ++q) {
        const std::size_t r = order[q];
        shape.build_input(i, data.e[r], data.x.row(r), input);
        net.forward(input, cache);
        const double z = cache.activations.back()[0];
        const double t = data.x.at(r, i);
        total += bce_from_logit(z, t);
        const double dz = sigmoid(z) - t;
        net.backward(cache, std::span<const double>(&dz, 1), grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      auto& p = net.params();
      if (clf.kind() == classifier_kind::mlp) {
        for (std::size_t k = 0; k < np; ++k) {
          const double g = grad[k] * inv + (net.is_bias(k) ? 0.0 : clf.reg() * p[k]);
          velocity[k] = cfg.momentum * velocity[k] - rate * g;
          p[k] += velocity[k];
        }
      } else {
        for (std::size_t k = 0; k < np; ++k) {
          velocity[k] = cfg.momentum * velocity[k] - rate * grad[k] * inv;
          p[k] += velocity[k];
          if (!net.is_bias(k)) p[k] = soft_threshold(p[k], rate * clf.reg());
        }
      }
    }
    const double mean = rows > 0 ? total / static_cast<double>(rows) : 0.0;
    curve.push_back(mean);
    if (!std::isfinite(mean) || !all_finite(net.params())) break;
  }
  return curve;
}

}  // namespace

pipeline_result train_pipeline(const conditional_dn& dn, const labeled_features& data, const sgd_config& cfg,
                               std::size_t jobs) {
  dn.validate();
  if (data.x.rows != data.e.size() || (data.size() > 0 && data.x.cols != dn.n)) {
    throw std::invalid_argument("train_pipeline: data shape does not match the network");
  }
  for (const auto& e : data.e) {
    if (e.size() != dn.m) throw std::invalid_argument("train_pipeline: evidence dimension mismatch");
  }
  pipeline_result res{dn, std::vector<vec>(dn.n)};
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < dn.n; i = next++) {
      res.epoch_loss[i] = train_one(res.dn.classifiers[i], dn, i, data, cfg);
    }
  };
  const std::size_t nthreads = std::clamp<std::size_t>(jobs, 1, dn.n);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<std::size_t> failed;
  for (std::size_t i = 0; i < dn.n; ++i) {
    const auto& curve = res.epoch_loss[i];
    if (!all_finite(curve) || !all_finite(res.dn.classifiers[i].net().params())) failed.push_back(i);
  }
  if (!failed.empty()) {
    std::string msg = "train_pipeline: classifiers diverged:";
    for (auto i : failed) msg += " " + std::to_string(i);
    throw training_error(msg, failed);
  }
  return res;
}

}  // namespace ddn
