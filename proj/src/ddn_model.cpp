#include "ddn/ddn_model.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace ddn {

backbone backbone::make(std::size_t d, const std::vector<std::size_t>& hidden, std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> sizes{d};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(m);
  backbone bb{dense_net(sizes)};
  rng gen = rng::derive(seed, "backbone-init");
  bb.net.init(gen);
  return bb;
}

std::vector<std::size_t> backbone::default_hidden(std::size_t d, std::size_t n) { return {4 * std::max(d, n)}; }

vec backbone::forward(std::span<const double> v) const {
  vec e = net.logits(v);
  for (auto& z : e) z = sigmoid(z);
  return e;
}

std::vector<vec> backbone::forward_all(const dataset& data) const {
  std::vector<vec> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples) out.push_back(forward(ex.v));
  return out;
}

namespace {

void check_rate(double r) {
  if (!std::isfinite(r) || r <= 0.0) throw std::invalid_argument("learning rate must be positive");
}

}  // namespace

train_result_backbone pretrain_backbone(const backbone& init, const dataset& data, const sgd_config& cfg) {
  if (init.output_dim() != data.n) {
    throw std::invalid_argument("pretrain_backbone: backbone outputs must equal the label count");
  }
  if (init.input_dim() != data.d) throw std::invalid_argument("pretrain_backbone: feature dimension mismatch");
  check_rate(cfg.learning_rate);
  train_result_backbone res{init, {}};
  dense_net& net = res.model.net;
  const std::size_t np = net.param_count();
  const std::size_t n = data.n;
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng gen = rng::derive(cfg.seed, "backbone-train");
  vec velocity(np, 0.0);
  vec grad(np);
  vec dlogits(n);
  dense_net::cache cache;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    gen.shuffle(order);
    const double rate = cfg.rate_at(epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t q = start; q < end; ++q) {
        const auto& ex = data.examples[order[q]];
        net.forward(ex.v, cache);
        const vec& z = cache.activations.back();
        for (std::size_t i = 0; i < n; ++i) {
          total += bce_from_logit(z[i], ex.x[i]) / static_cast<double>(n);
          dlogits[i] = (sigmoid(z[i]) - ex.x[i]) / static_cast<double>(n);
        }
        net.backward(cache, dlogits, grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      auto& p = net.params();
      for (std::size_t k = 0; k < np; ++k) {
        const double g = grad[k] * inv + (net.is_bias(k) ? 0.0 : cfg.l2 * p[k]);
        velocity[k] = cfg.momentum * velocity[k] - rate * g;
        p[k] += velocity[k];
      }
    }
    const double mean = data.size() > 0 ? total / static_cast<double>(data.size()) : 0.0;
    if (!std::isfinite(mean) || !all_finite(net.params())) {
      throw numeric_error("pretrain_backbone: diverged at epoch " + std::to_string(epoch));
    }
    res.epoch_loss.push_back(mean);
  }
  return res;
}

void deep_dependency_network::validate() const {
  head.validate();
  if (bb.output_dim() != head.m) {
    throw std::invalid_argument("deep_dependency_network: backbone output dimension differs from head evidence size");
  }
}

double cpll_loss(const deep_dependency_network& model, std::span<const double> v, std::span<const std::uint8_t> x) {
  const vec e = model.bb.forward(v);
  if (x.size() != model.head.n) throw std::invalid_argument("cpll_loss: label dimension mismatch");
  vec buf;
  double loss = 0.0;
  for (std::size_t i = 0; i < model.head.n; ++i) {
    model.head.build_input(i, e, x, buf);
    loss += bce_from_logit(model.head.classifiers[i].logit(buf), x[i]);
  }
  return loss;
}

double mean_cpll(const deep_dependency_network& model, const dataset& data) {
  double s = 0.0;
  for (const auto& ex : data.examples) s += cpll_loss(model, ex.v, ex.x);
  return data.size() > 0 ? s / static_cast<double>(data.size()) : 0.0;
}

namespace {

// Adds one example's CPLL gradient into g; returns its loss.
double accumulate_cpll(const deep_dependency_network& model, const example& ex, cpll_gradient& g,
                       dense_net::cache& bb_cache, dense_net::cache& head_cache, vec& buf, vec& input_grad) {
  const auto& head = model.head;
  const std::size_t m = head.m;
  model.bb.net.forward(ex.v, bb_cache);
  const vec& z = bb_cache.activations.back();
  vec e(m);
  for (std::size_t j = 0; j < m; ++j) e[j] = sigmoid(z[j]);

  vec de(m, 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < head.n; ++i) {
    head.build_input(i, e, ex.x, buf);
    const dense_net& net = head.classifiers[i].net();
    net.forward(buf, head_cache);
    const double zi = head_cache.activations.back()[0];
    const double t = ex.x[i];
    loss += bce_from_logit(zi, t);
    const double dz = sigmoid(zi) - t;
    input_grad.assign(buf.size(), 0.0);
    net.backward(head_cache, std::span<const double>(&dz, 1), g.head[i], input_grad);
    for (std::size_t j = 0; j < m; ++j) de[j] += input_grad[j];
  }
  for (std::size_t j = 0; j < m; ++j) de[j] *= e[j] * (1.0 - e[j]);
  model.bb.net.backward(bb_cache, de, g.backbone);
  return loss;
}

cpll_gradient zero_gradient(const deep_dependency_network& model) {
  cpll_gradient g;
  g.backbone.assign(model.bb.net.param_count(), 0.0);
  for (const auto& c : model.head.classifiers) g.head.emplace_back(c.net().param_count(), 0.0);
  return g;
}

}  // namespace

cpll_gradient cpll_grad(const deep_dependency_network& model, std::span<const example> batch) {
  model.validate();
  if (batch.empty()) throw std::invalid_argument("cpll_grad: empty batch");
  cpll_gradient g = zero_gradient(model);
  dense_net::cache bb_cache, head_cache;
  vec buf, input_grad;
  for (const auto& ex : batch) g.loss += accumulate_cpll(model, ex, g, bb_cache, head_cache, buf, input_grad);
  return g;
}

train_result_joint train_joint(const deep_dependency_network& init, const dataset& data, const sgd_config& cfg) {
  init.validate();
  if (cfg.learning_rate < joint_rate_min || cfg.learning_rate > joint_rate_max) {
    throw std::invalid_argument("train_joint: initial learning rate must lie in [1e-5, 1e-3]");
  }
  if (data.d != init.bb.input_dim() || data.n != init.head.n) {
    throw std::invalid_argument("train_joint: dataset shape does not match the model");
  }
  train_result_joint res{init, {}};
  auto& model = res.model;
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  rng gen = rng::derive(cfg.seed, "ddn-joint");

  cpll_gradient vel = zero_gradient(model);
  dense_net::cache bb_cache, head_cache;
  vec buf, input_grad;

  auto step = [&](dense_net& net, const vec& grad, vec& velocity, double inv, double rate, double l2, double l1) {
    auto& p = net.params();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const bool bias = net.is_bias(k);
      const double g = grad[k] * inv + (bias ? 0.0 : l2 * p[k]);
      velocity[k] = cfg.momentum * velocity[k] - rate * g;
      p[k] += velocity[k];
      if (l1 > 0.0 && !bias) p[k] = soft_threshold(p[k], rate * l1);
    }
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    gen.shuffle(order);
    const double rate = cfg.rate_at(epoch);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      cpll_gradient g = zero_gradient(model);
      for (std::size_t q = start; q < end; ++q) {
        accumulate_cpll(model, data.examples[order[q]], g, bb_cache, head_cache, buf, input_grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      step(model.bb.net, g.backbone, vel.backbone, inv, rate, cfg.l2, 0.0);
      for (std::size_t i = 0; i < model.head.n; ++i) {
        auto& clf = model.head.classifiers[i];
        const bool lr = clf.kind() == classifier_kind::lr;
        step(clf.net(), g.head[i], vel.head[i], inv, rate, lr ? 0.0 : clf.reg(), lr ? clf.reg() : 0.0);
      }
    }
    const double loss = mean_cpll(model, data);
    if (!std::isfinite(loss)) {
      throw numeric_error("train_joint: diverged at epoch " + std::to_string(epoch));
    }
    res.epoch_loss.push_back(loss);
  }
  return res;
}

marginal_estimates infer_from_evidence(const conditional_dn& head, std::span<const double> e,
                                       const ddn_inference_config& cfg, rng& gen, gibbs_trace* trace) {
  head.validate();
  if (e.size() != head.m) throw std::invalid_argument("infer: evidence dimension mismatch");
  if (cfg.n_samples == 0) throw std::invalid_argument("infer: need at least one sample");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = head.n;

  // Conditionals depend on e (fixed here) and x_-i only, so they are memoised
  // on the label bits with bit i cleared.
  const bool memo = n <= 63;
  std::vector<std::unordered_map<std::uint64_t, double>> memo_table(n);
  std::vector<std::uint8_t> x(n);
  std::uint64_t bits = 0;
  vec buf;
  auto cond = [&](std::size_t i) {
    if (!memo) {
      head.build_input(i, e, x, buf);
      return head.classifiers[i].prob(buf);
    }
    const std::uint64_t key = bits & ~(std::uint64_t{1} << i);
    const auto it = memo_table[i].find(key);
    if (it != memo_table[i].end()) return it->second;
    head.build_input(i, e, x, buf);
    const double p = head.classifiers[i].prob(buf);
    memo_table[i].emplace(key, p);
    return p;
  };
  auto set = [&](std::size_t i, std::uint8_t v) {
    x[i] = v;
    if (memo) {
      const std::uint64_t mask = std::uint64_t{1} << i;
      bits = v ? (bits | mask) : (bits & ~mask);
    }
  };

  // The mixture sum is grouped by distinct conditional value:
  // p_i = sum_k (count_k / N) * value_k. Same estimator, but it returns the
  // conditional exactly when the conditional never changes across samples.
  struct group {
    double value;
    std::size_t count;
  };
  std::vector<std::unordered_map<std::uint64_t, std::size_t>> group_index(n);
  std::vector<std::vector<group>> groups(n);
  auto tally = [&](std::size_t i, double p) {
    const auto key = std::bit_cast<std::uint64_t>(p);
    const auto [it, fresh] = group_index[i].try_emplace(key, groups[i].size());
    if (fresh) groups[i].push_back({p, 0});
    ++groups[i][it->second].count;
  };

  for (std::size_t i = 0; i < n; ++i) set(i, gen.bernoulli(0.5) ? 1 : 0);

  std::vector<std::size_t> perm(n);
  std::size_t kept = 0;
  const std::size_t sweeps = cfg.burn_in + cfg.n_samples;
  for (std::size_t s = 0; s < sweeps; ++s) {
    std::iota(perm.begin(), perm.end(), 0);
    gen.shuffle(perm);
    for (auto i : perm) set(i, gen.uniform() < cond(i) ? 1 : 0);
    if (s < cfg.burn_in) continue;
    ++kept;
    vec* row = nullptr;
    if (trace != nullptr) {
      trace->samples.push_back(x);
      trace->permutations.push_back(perm);
      trace->conditionals.emplace_back(n);
      row = &trace->conditionals.back();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double p = cond(i);
      tally(i, p);
      if (row != nullptr) (*row)[i] = p;
    }
  }
  marginal_estimates out;
  out.method = inference_method::gibbs;
  out.p.resize(n);
  const double total = static_cast<double>(kept);
  for (std::size_t i = 0; i < n; ++i) {
    double est = 0.0;
    for (const auto& g : groups[i]) est += (static_cast<double>(g.count) / total) * g.value;
    out.p[i] = std::clamp(est, 0.0, 1.0);
  }
  out.iterations = sweeps;
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

marginal_estimates infer(const deep_dependency_network& model, std::span<const double> v,
                         const ddn_inference_config& cfg, rng& gen, gibbs_trace* trace) {
  model.validate();
  const vec e = model.bb.forward(v);
  return infer_from_evidence(model.head, e, cfg, gen, trace);
}

std::vector<std::uint8_t> predict_labels(std::span<const double> p, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("predict_labels: threshold must lie in [0, 1]");
  std::vector<std::uint8_t> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > threshold ? 1 : 0;
  return out;
}

std::vector<std::uint8_t> predict_labels(const marginal_estimates& est, double threshold) {
  return predict_labels(est.p, threshold);
}

}  // namespace ddn
