#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ddn/mrf.hpp"

namespace ddn {

vec structure_config::default_lambda_schedule(std::size_t rows, std::size_t cols) {
  // Below sqrt(ln p / M) sampling noise alone keeps weights alive.
  const double noise = std::sqrt(std::log(static_cast<double>(std::max<std::size_t>(cols, 2))) /
                                 static_cast<double>(std::max<std::size_t>(rows, 1)));
  vec s;
  for (double l = std::max(0.001, noise); l <= 10.0 + 1e-12; l *= 2.0) s.push_back(l);
  if (s.empty()) s.push_back(10.0);
  return s;
}

namespace {

// Mean logistic loss of column `target` on the others, plus gradient.
struct logistic_problem {
  const binary_matrix& data;
  std::size_t target;
  std::vector<std::size_t> cols;  // feature columns, ascending, excluding target

  double loss_grad(double bias, const vec& w, double& gb, vec& gw) const {
    const std::size_t p = cols.size();
    gb = 0.0;
    gw.assign(p, 0.0);
    double loss = 0.0;
    for (std::size_t m = 0; m < data.rows; ++m) {
      const auto row = data.row(m);
      double z = bias;
      for (std::size_t k = 0; k < p; ++k) {
        if (row[cols[k]]) z += w[k];
      }
      const double y = row[target];
      loss += bce_from_logit(z, y);
      const double r = sigmoid(z) - y;
      gb += r;
      for (std::size_t k = 0; k < p; ++k) {
        if (row[cols[k]]) gw[k] += r;
      }
    }
    const double inv = 1.0 / static_cast<double>(data.rows);
    gb *= inv;
    for (auto& g : gw) g *= inv;
    return loss * inv;
  }
};

double l1_norm(const vec& w) {
  double s = 0.0;
  for (double x : w) s += std::abs(x);
  return s;
}

}  // namespace

l1_logistic_fit fit_l1_logistic(const binary_matrix& data, std::size_t target, double lambda,
                                std::size_t max_iters, double tol, const l1_logistic_fit* warm) {
  if (target >= data.cols) throw std::out_of_range("fit_l1_logistic: target column out of range");
  logistic_problem prob{data, target, {}};
  for (std::size_t c = 0; c < data.cols; ++c) {
    if (c != target) prob.cols.push_back(c);
  }
  const std::size_t p = prob.cols.size();

  l1_logistic_fit cur;
  cur.weights.assign(p, 0.0);
  if (warm != nullptr && warm->weights.size() == p) cur = *warm;
  if (data.rows == 0) return cur;

  // Lipschitz bound of the smooth part: 0.25 * mean squared row norm
  // (including the intercept column).
  double mean_sq = 0.0;
  for (std::size_t m = 0; m < data.rows; ++m) {
    const auto row = data.row(m);
    double s = 1.0;
    for (auto c : prob.cols) s += row[c];
    mean_sq += s;
  }
  mean_sq /= static_cast<double>(data.rows);
  const double step = 1.0 / (0.25 * mean_sq);

  // FISTA with adaptive restart.
  double yb = cur.bias;
  vec yw = cur.weights;
  double t = 1.0;
  double gb = 0.0;
  vec gw;
  double prev_obj = std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iters; ++it) {
    prob.loss_grad(yb, yw, gb, gw);
    const double nb = yb - step * gb;
    vec nw(p);
    for (std::size_t k = 0; k < p; ++k) nw[k] = soft_threshold(yw[k] - step * gw[k], step * lambda);

    double change = std::abs(nb - cur.bias);
    for (std::size_t k = 0; k < p; ++k) change = std::max(change, std::abs(nw[k] - cur.weights[k]));

    double dummy_b = 0.0;
    vec dummy_w;
    const double obj = prob.loss_grad(nb, nw, dummy_b, dummy_w) + lambda * l1_norm(nw);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (obj > prev_obj) {
      // Restart momentum from the last accepted iterate.
      t = 1.0;
      yb = cur.bias;
      yw = cur.weights;
      continue;
    }
    const double beta = (t - 1.0) / t_next;
    yb = nb + beta * (nb - cur.bias);
    for (std::size_t k = 0; k < p; ++k) yw[k] = nw[k] + beta * (nw[k] - cur.weights[k]);
    cur.bias = nb;
    cur.weights = std::move(nw);
    t = t_next;
    prev_obj = obj;
    if (change < tol) break;
  }
  return cur;
}

structure_result learn_structure(const binary_matrix& data, const structure_config& cfg) {
  if (cfg.neighbor_cap < 2 || cfg.neighbor_cap > 10) {
    throw std::invalid_argument("learn_structure: neighbor_cap must lie in [2, 10]");
  }
  vec schedule = cfg.lambda_schedule.empty() ? structure_config::default_lambda_schedule(data.rows, data.cols)
                                             : cfg.lambda_schedule;
  std::sort(schedule.begin(), schedule.end());

  const std::size_t nn = data.cols;
  structure_result res;
  res.node_lambda.assign(nn, 0.0);

  std::vector<bool> constant(nn, false);
  for (std::size_t j = 0; j < nn; ++j) {
    std::size_t ones = 0;
    for (std::size_t m = 0; m < data.rows; ++m) ones += data.at(m, j);
    if (ones == 0 || ones == data.rows) {
      constant[j] = true;
      res.warnings.push_back("node " + std::to_string(j) + " is constant; no pairwise features");
    }
  }

  // strength[i][j]: |weight of j in the regression of i|
  std::vector<vec> strength(nn, vec(nn, 0.0));
  for (std::size_t i = 0; i < nn; ++i) {
    if (constant[i]) continue;
    l1_logistic_fit fit;
    const l1_logistic_fit* warm = nullptr;
    bool capped = false;
    for (double lambda : schedule) {
      fit = fit_l1_logistic(data, i, lambda, cfg.max_iters, cfg.tol, warm);
      warm = &fit;
      res.node_lambda[i] = lambda;
      std::size_t nz = 0;
      for (std::size_t k = 0; k < fit.weights.size(); ++k) {
        const std::size_t j = k < i ? k : k + 1;
        if (fit.weights[k] != 0.0 && !constant[j]) ++nz;
      }
      if (nz <= cfg.neighbor_cap) {
        capped = true;
        break;
      }
    }
    if (!capped) {
      res.warnings.push_back("node " + std::to_string(i) + " exceeds the neighbor cap at the largest lambda");
    }
    for (std::size_t k = 0; k < fit.weights.size(); ++k) {
      const std::size_t j = k < i ? k : k + 1;
      if (!constant[j]) strength[i][j] = std::abs(fit.weights[k]);
    }
  }

  // OR rule, then admit edges strongest-first while both endpoints have room.
  struct candidate {
    double s;
    std::size_t a, b;
  };
  std::vector<candidate> cands;
  for (std::size_t a = 0; a < nn; ++a) {
    for (std::size_t b = a + 1; b < nn; ++b) {
      const double s = std::max(strength[a][b], strength[b][a]);
      if (s > 0.0) cands.push_back({s, a, b});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const candidate& x, const candidate& y) { return x.s > y.s; });
  std::vector<std::size_t> degree(nn, 0);
  for (const auto& c : cands) {
    if (degree[c.a] < cfg.neighbor_cap && degree[c.b] < cfg.neighbor_cap) {
      res.edges.emplace_back(c.a, c.b);
      ++degree[c.a];
      ++degree[c.b];
    }
  }
  std::sort(res.edges.begin(), res.edges.end());
  return res;
}

pairwise_mrf mrf_from_structure(std::size_t n_x, std::size_t n_e, const std::vector<edge>& edges,
                                std::size_t neighbor_cap) {
  pairwise_mrf mrf(n_x, n_e, neighbor_cap);
  for (std::size_t j = 0; j < n_x + n_e; ++j) mrf.add_unary(j, 0.0);
  for (const auto& [a, b] : edges) mrf.add_pair(a, b, 0.0);
  return mrf;
}

namespace {

void check_columns(const pairwise_mrf& mrf, const binary_matrix& data) {
  if (data.cols != mrf.node_count()) {
    throw std::invalid_argument("pll: data has " + std::to_string(data.cols) + " columns, model has " +
                                std::to_string(mrf.node_count()) + " nodes");
  }
}

double row_pll(const pairwise_mrf& mrf, std::span<const std::uint8_t> row) {
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double z = mrf.conditional_logit(j, row);
    s -= bce_from_logit(z, row[j]);
  }
  return s;
}

// Adds the gradient of one row's pll into g.
void accumulate_row_grad(const pairwise_mrf& mrf, std::span<const std::uint8_t> row, vec& resid, vec& g) {
  const std::size_t nn = row.size();
  resid.resize(nn);
  for (std::size_t j = 0; j < nn; ++j) resid[j] = row[j] - sigmoid(mrf.conditional_logit(j, row));
  const auto& feats = mrf.features();
  for (std::size_t k = 0; k < feats.size(); ++k) {
    const auto& f = feats[k];
    if (!f.is_pair()) {
      g[k] += resid[f.a];
    } else {
      g[k] += resid[f.a] * row[f.b] + resid[f.b] * row[f.a];
    }
  }
}

}  // namespace

double pll(const pairwise_mrf& mrf, const binary_matrix& data, double l2) {
  check_columns(mrf, data);
  double s = 0.0;
  for (std::size_t m = 0; m < data.rows; ++m) s += row_pll(mrf, data.row(m));
  if (data.rows > 0) s /= static_cast<double>(data.rows);
  return s - 0.5 * l2 * norm2_sq(mrf.weights());
}

vec pll_grad(const pairwise_mrf& mrf, const binary_matrix& data, double l2) {
  check_columns(mrf, data);
  vec g(mrf.feature_count(), 0.0);
  vec resid;
  for (std::size_t m = 0; m < data.rows; ++m) accumulate_row_grad(mrf, data.row(m), resid, g);
  if (data.rows > 0) {
    const double inv = 1.0 / static_cast<double>(data.rows);
    for (auto& x : g) x *= inv;
  }
  const auto& w = mrf.weights();
  for (std::size_t k = 0; k < g.size(); ++k) g[k] -= l2 * w[k];
  return g;
}

weight_fit_result fit_weights(const pairwise_mrf& mrf, const binary_matrix& data, const sgd_config& cfg) {
  check_columns(mrf, data);
  weight_fit_result res{mrf, 0.0, {}};
  pairwise_mrf& model = res.mrf;
  const std::size_t nf = model.feature_count();
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);

  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), 0);
  rng gen = rng::derive(cfg.seed, "mrf-fit");
  vec velocity(nf, 0.0);
  vec g(nf);
  vec resid;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    gen.shuffle(order);
    const double rate = cfg.rate_at(epoch);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t q = start; q < end; ++q) accumulate_row_grad(model, data.row(order[q]), resid, g);
      const double inv = 1.0 / static_cast<double>(end - start);
      vec& w = model.weights();
      // The l2 term is applied as a proximal shrink so large penalties stay stable.
      const double shrink = 1.0 / (1.0 + rate * cfg.l2);
      for (std::size_t k = 0; k < nf; ++k) {
        velocity[k] = cfg.momentum * velocity[k] + rate * g[k] * inv;
        w[k] = (w[k] + velocity[k]) * shrink;
      }
    }
    const double value = pll(model, data);
    if (!std::isfinite(value) || !all_finite(model.weights())) {
      throw numeric_error("fit_weights: diverged at epoch " + std::to_string(epoch) +
                          " (learning rate " + std::to_string(rate) + ")");
    }
    res.epoch_pll.push_back(value);
  }
  res.final_pll = pll(model, data);
  return res;
}

}  // namespace ddn
