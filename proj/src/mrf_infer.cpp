#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ddn/mrf.hpp"

namespace ddn {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_ms(clock_type::time_point t0) {
  return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

bool over_budget(clock_type::time_point t0, millis budget) {
  return budget.count() > 0 && clock_type::now() - t0 >= budget;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gibbs sampling (fixed order)

marginal_estimates gibbs_marginals(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence,
                                   const gibbs_config& cfg, rng& gen) {
  if (evidence.size() != mrf.n_e()) throw std::invalid_argument("gibbs_marginals: evidence size mismatch");
  const auto t0 = clock_type::now();
  const std::size_t nx = mrf.n_x();
  std::vector<std::uint8_t> state(mrf.node_count());
  std::copy(evidence.begin(), evidence.end(), state.begin() + static_cast<std::ptrdiff_t>(nx));
  for (std::size_t i = 0; i < nx; ++i) state[i] = gen.bernoulli(0.5) ? 1 : 0;

  std::vector<std::size_t> ones(nx, 0);
  std::size_t kept = 0;
  std::size_t sweep = 0;
  marginal_estimates out;
  out.method = inference_method::gibbs;
  for (; sweep < cfg.n_samples; ++sweep) {
    if (over_budget(t0, cfg.time_budget)) {
      out.hit_time_budget = true;
      break;
    }
    for (std::size_t i = 0; i < nx; ++i) {
      state[i] = gen.uniform() < sigmoid(mrf.conditional_logit(i, state)) ? 1 : 0;
    }
    if (sweep >= cfg.burn_in) {
      ++kept;
      for (std::size_t i = 0; i < nx; ++i) ones[i] += state[i];
    }
  }
  out.p.resize(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    out.p[i] = kept > 0 ? static_cast<double>(ones[i]) / static_cast<double>(kept) : static_cast<double>(state[i]);
  }
  out.iterations = sweep;
  out.wall_ms = elapsed_ms(t0);
  return out;
}

// ---------------------------------------------------------------------------
// Exact enumeration

marginal_estimates exact_marginals(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence) {
  const auto t0 = clock_type::now();
  const conditioned_model cm = condition_on_evidence(mrf, evidence);
  const std::size_t n = cm.n;
  if (n > 24) throw std::invalid_argument("exact_marginals: too many labels to enumerate");
  const std::size_t total = std::size_t{1} << n;
  vec scores(total);
  std::vector<std::uint8_t> x(n);
  for (std::size_t s = 0; s < total; ++s) {
    for (std::size_t i = 0; i < n; ++i) x[i] = (s >> i) & 1U;
    scores[s] = cm.score(x);
  }
  const double log_z = log_sum_exp(scores);
  marginal_estimates out;
  out.method = inference_method::exact;
  out.p.assign(n, 0.0);
  for (std::size_t s = 0; s < total; ++s) {
    const double pr = std::exp(scores[s] - log_z);
    for (std::size_t i = 0; i < n; ++i) {
      if ((s >> i) & 1U) out.p[i] += pr;
    }
  }
  for (auto& p : out.p) p = std::clamp(p, 0.0, 1.0);
  out.iterations = total;
  out.wall_ms = elapsed_ms(t0);
  return out;
}

// ---------------------------------------------------------------------------
// Cluster-graph propagation

std::vector<std::size_t> min_degree_order(const conditioned_model& model) {
  const std::size_t n = model.n;
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (const auto& p : model.pairs) {
    adj[p.i][p.j] = true;
    adj[p.j][p.i] = true;
  }
  std::vector<bool> done(n, false);
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t best = n;
    std::size_t best_deg = n + 1;
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v]) continue;
      std::size_t deg = 0;
      for (std::size_t u = 0; u < n; ++u) deg += (!done[u] && adj[v][u]) ? 1 : 0;
      if (deg < best_deg) {
        best_deg = deg;
        best = v;
      }
    }
    std::vector<std::size_t> nbrs;
    for (std::size_t u = 0; u < n; ++u) {
      if (!done[u] && adj[best][u]) nbrs.push_back(u);
    }
    for (auto a : nbrs) {
      for (auto b : nbrs) {
        if (a != b) adj[a][b] = true;
      }
    }
    done[best] = true;
    order.push_back(best);
  }
  return order;
}

std::size_t induced_width(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence) {
  const conditioned_model cm = condition_on_evidence(mrf, evidence);
  const auto order = min_degree_order(cm);
  const std::size_t n = cm.n;
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (const auto& p : cm.pairs) {
    adj[p.i][p.j] = true;
    adj[p.j][p.i] = true;
  }
  std::vector<bool> done(n, false);
  std::size_t width = 0;
  for (auto v : order) {
    std::vector<std::size_t> nbrs;
    for (std::size_t u = 0; u < n; ++u) {
      if (!done[u] && adj[v][u]) nbrs.push_back(u);
    }
    width = std::max(width, nbrs.size());
    for (auto a : nbrs) {
      for (auto b : nbrs) {
        if (a != b) adj[a][b] = true;
      }
    }
    done[v] = true;
  }
  return width;
}

namespace {

// Table over binary variables; bit t of an index is the value of scope[t].
struct factor {
  std::vector<std::size_t> scope;
  vec table;

  factor() = default;
  factor(std::vector<std::size_t> s, double fill) : scope(std::move(s)), table(std::size_t{1} << scope.size(), fill) {}
};

// For each index of `big`, the index of `small` it projects onto.
std::vector<std::size_t> projection(const std::vector<std::size_t>& big, const std::vector<std::size_t>& small) {
  std::vector<std::size_t> bitpos(small.size());
  for (std::size_t t = 0; t < small.size(); ++t) {
    const auto it = std::find(big.begin(), big.end(), small[t]);
    bitpos[t] = static_cast<std::size_t>(it - big.begin());
  }
  const std::size_t total = std::size_t{1} << big.size();
  std::vector<std::size_t> proj(total);
  for (std::size_t s = 0; s < total; ++s) {
    std::size_t q = 0;
    for (std::size_t t = 0; t < small.size(); ++t) q |= ((s >> bitpos[t]) & 1U) << t;
    proj[s] = q;
  }
  return proj;
}

struct cluster {
  std::vector<std::size_t> scope;
  vec log_potential;
  vec potential;
  std::vector<std::size_t> edges;  // indices into cluster_graph::links
};

struct link {
  std::size_t a, b;  // a created before b
  std::vector<std::size_t> sep;
  std::vector<std::size_t> proj_a, proj_b;
  vec msg_ab, msg_ba;
};

struct cluster_graph {
  std::vector<cluster> clusters;
  std::vector<link> links;
  std::vector<std::size_t> home;  // per variable, a cluster containing it
};

std::vector<std::size_t> sorted_union(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> u;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(u));
  return u;
}

cluster_graph build_cluster_graph(const conditioned_model& cm, std::size_t i_bound) {
  const std::size_t n = cm.n;
  const auto order = min_degree_order(cm);
  std::vector<std::size_t> pos(n);
  for (std::size_t k = 0; k < n; ++k) pos[order[k]] = k;

  // Bucket items: original factors (source == none) or messages from a cluster.
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  struct item {
    std::vector<std::size_t> scope;  // sorted
    std::size_t source = none;
    factor original;
  };
  std::vector<std::vector<item>> buckets(n);
  auto bucket_of = [&](const std::vector<std::size_t>& scope) {
    std::size_t best = scope.front();
    for (auto v : scope) {
      if (pos[v] < pos[best]) best = v;
    }
    return best;
  };

  for (std::size_t i = 0; i < n; ++i) {
    factor f({i}, 0.0);
    f.table[1] = cm.unary[i];
    buckets[i].push_back({{i}, none, std::move(f)});
  }
  for (const auto& p : cm.pairs) {
    std::vector<std::size_t> sc{std::min(p.i, p.j), std::max(p.i, p.j)};
    factor f(sc, 0.0);
    f.table[3] = p.w;
    buckets[bucket_of(sc)].push_back({sc, none, std::move(f)});
  }

  cluster_graph g;
  g.home.assign(n, none);
  for (auto v : order) {
    auto& items = buckets[v];
    std::stable_sort(items.begin(), items.end(),
                     [](const item& x, const item& y) { return x.scope.size() > y.scope.size(); });
    std::vector<std::size_t> minis;
    for (auto& it : items) {
      std::size_t target = none;
      for (auto c : minis) {
        if (sorted_union(g.clusters[c].scope, it.scope).size() <= i_bound) {
          target = c;
          break;
        }
      }
      if (target == none) {
        target = g.clusters.size();
        g.clusters.push_back({});
        minis.push_back(target);
      }
      auto& cl = g.clusters[target];
      cl.scope = sorted_union(cl.scope, it.scope);
    }
    // Place originals and message links once the mini-bucket scopes are final.
    std::vector<std::vector<factor>> originals(minis.size());
    for (auto& it : items) {
      std::size_t slot = 0;
      for (; slot < minis.size(); ++slot) {
        const auto& sc = g.clusters[minis[slot]].scope;
        if (std::includes(sc.begin(), sc.end(), it.scope.begin(), it.scope.end())) break;
      }
      if (it.source == none) {
        originals[slot].push_back(std::move(it.original));
      } else {
        g.links.push_back({it.source, minis[slot], it.scope, {}, {}, {}, {}});
      }
    }
    for (std::size_t slot = 0; slot < minis.size(); ++slot) {
      auto& cl = g.clusters[minis[slot]];
      cl.log_potential.assign(std::size_t{1} << cl.scope.size(), 0.0);
      for (const auto& f : originals[slot]) {
        const auto proj = projection(cl.scope, f.scope);
        for (std::size_t s = 0; s < cl.log_potential.size(); ++s) cl.log_potential[s] += f.table[proj[s]];
      }
    }
    g.home[v] = minis.front();
    for (std::size_t slot = 0; slot + 1 < minis.size(); ++slot) {
      g.links.push_back({minis[slot], minis[slot + 1], {v}, {}, {}, {}, {}});
    }
    for (auto c : minis) {
      std::vector<std::size_t> rest;
      for (auto u : g.clusters[c].scope) {
        if (u != v) rest.push_back(u);
      }
      if (rest.empty()) continue;
      buckets[bucket_of(rest)].push_back({rest, c, {}});
    }
  }

  for (std::size_t e = 0; e < g.links.size(); ++e) {
    auto& l = g.links[e];
    l.proj_a = projection(g.clusters[l.a].scope, l.sep);
    l.proj_b = projection(g.clusters[l.b].scope, l.sep);
    const double uniform = 1.0 / static_cast<double>(std::size_t{1} << l.sep.size());
    l.msg_ab.assign(std::size_t{1} << l.sep.size(), uniform);
    l.msg_ba = l.msg_ab;
    g.clusters[l.a].edges.push_back(e);
    g.clusters[l.b].edges.push_back(e);
  }
  for (auto& cl : g.clusters) {
    const double mx = *std::max_element(cl.log_potential.begin(), cl.log_potential.end());
    cl.potential.resize(cl.log_potential.size());
    for (std::size_t s = 0; s < cl.potential.size(); ++s) cl.potential[s] = std::exp(cl.log_potential[s] - mx);
  }
  return g;
}

// Potential of cluster c times all incoming messages except the one over `skip`.
vec cluster_belief(const cluster_graph& g, std::size_t c, std::size_t skip) {
  const auto& cl = g.clusters[c];
  vec b = cl.potential;
  for (auto e : cl.edges) {
    if (e == skip) continue;
    const auto& l = g.links[e];
    const bool from_b = (l.a == c);
    const vec& m = from_b ? l.msg_ba : l.msg_ab;
    const auto& proj = from_b ? l.proj_a : l.proj_b;
    for (std::size_t s = 0; s < b.size(); ++s) b[s] *= m[proj[s]];
  }
  return b;
}

double send(cluster_graph& g, std::size_t e, bool a_to_b, double damping) {
  auto& l = g.links[e];
  const std::size_t src = a_to_b ? l.a : l.b;
  const vec b = cluster_belief(g, src, e);
  const auto& proj = a_to_b ? l.proj_a : l.proj_b;
  vec fresh(std::size_t{1} << l.sep.size(), 0.0);
  for (std::size_t s = 0; s < b.size(); ++s) fresh[proj[s]] += b[s];
  double z = 0.0;
  for (double x : fresh) z += x;
  for (auto& x : fresh) x /= z;
  vec& old = a_to_b ? l.msg_ab : l.msg_ba;
  double change = 0.0;
  for (std::size_t s = 0; s < fresh.size(); ++s) {
    const double upd = damping * old[s] + (1.0 - damping) * fresh[s];
    change = std::max(change, std::abs(upd - old[s]));
    old[s] = upd;
  }
  return change;
}

}  // namespace

marginal_estimates bp_marginals(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence,
                                const bp_config& cfg) {
  if (cfg.i_bound < 2) throw std::invalid_argument("bp_marginals: i_bound must be at least 2");
  if (cfg.damping < 0.0 || cfg.damping >= 1.0) throw std::invalid_argument("bp_marginals: damping must lie in [0, 1)");
  const auto t0 = clock_type::now();
  const conditioned_model cm = condition_on_evidence(mrf, evidence);
  cluster_graph g = build_cluster_graph(cm, cfg.i_bound);

  marginal_estimates out;
  out.method = inference_method::bp;
  std::size_t it = 0;
  double residual = 0.0;
  for (; it < cfg.max_iters; ++it) {
    if (over_budget(t0, cfg.time_budget)) {
      out.hit_time_budget = true;
      break;
    }
    residual = 0.0;
    // Forward pass follows the elimination order, backward pass reverses it.
    for (std::size_t e = 0; e < g.links.size(); ++e) residual = std::max(residual, send(g, e, true, cfg.damping));
    for (std::size_t e = g.links.size(); e-- > 0;) residual = std::max(residual, send(g, e, false, cfg.damping));
    if (residual < cfg.tol) {
      ++it;
      break;
    }
  }
  out.iterations = it;
  out.residual = residual;
  out.p.assign(cm.n, 0.5);
  for (std::size_t v = 0; v < cm.n; ++v) {
    const std::size_t c = g.home[v];
    const vec b = cluster_belief(g, c, static_cast<std::size_t>(-1));
    const auto& sc = g.clusters[c].scope;
    const std::size_t bit = static_cast<std::size_t>(std::find(sc.begin(), sc.end(), v) - sc.begin());
    double on = 0.0;
    double total = 0.0;
    for (std::size_t s = 0; s < b.size(); ++s) {
      total += b[s];
      if ((s >> bit) & 1U) on += b[s];
    }
    out.p[v] = std::clamp(on / total, 0.0, 1.0);
  }
  out.wall_ms = elapsed_ms(t0);
  return out;
}

// ---------------------------------------------------------------------------
// MAP

namespace {

struct bnb_search {
  const conditioned_model& cm;
  // lower[k]: pairs (i, k) with i < k; upper[k]: pairs (k, j) with j > k.
  std::vector<std::vector<std::pair<std::size_t, double>>> lower, upper;
  std::vector<std::uint8_t> x, best_x;
  double best = -std::numeric_limits<double>::infinity();
  clock_type::time_point t0;
  millis budget;
  bool timed_out = false;
  std::size_t nodes = 0;

  bnb_search(const conditioned_model& m, millis b) : cm(m), lower(m.n), upper(m.n), x(m.n, 0), budget(b) {
    for (const auto& p : cm.pairs) {
      const std::size_t i = std::min(p.i, p.j);
      const std::size_t j = std::max(p.i, p.j);
      lower[j].emplace_back(i, p.w);
      upper[i].emplace_back(j, p.w);
    }
    t0 = clock_type::now();
  }

  // Incremental sums drift by a few ulps; never prune within this margin.
  double slack() const { return 1e-9 * (1.0 + std::abs(best)); }

  double initial_optimism() const {
    double o = 0.0;
    for (double u : cm.unary) o += std::max(u, 0.0);
    for (const auto& p : cm.pairs) o += std::max(p.w, 0.0);
    return o;
  }

  // Before assigning variable k, `score` holds all fully assigned features and
  // `optimism` the positive weights of features still satisfiable.
  void dfs(std::size_t k, double score, double optimism) {
    if (timed_out) return;
    if ((++nodes & 0xfffU) == 0 && over_budget(t0, budget)) {
      timed_out = true;
      return;
    }
    if (k == cm.n) {
      if (score > best - slack()) {
        // Re-sum from scratch so near-ties are decided on a fixed summation order.
        const double exact = cm.score(x);
        if (best_x.empty() || exact > best) {
          best = exact;
          best_x = x;
        }
      }
      return;
    }
    // Features settled by assigning k: its unary, and pairs whose later end is k.
    double gain1 = cm.unary[k];
    double settled = std::max(cm.unary[k], 0.0);
    for (const auto& [i, w] : lower[k]) {
      if (x[i]) {
        gain1 += w;
        settled += std::max(w, 0.0);
      }
    }
    double killed = 0.0;  // pairs (k, j) that die when x_k = 0
    for (const auto& [j, w] : upper[k]) killed += std::max(w, 0.0);

    const double bound1 = score + gain1 + (optimism - settled);
    const double bound0 = score + (optimism - settled - killed);
    const std::uint8_t first = bound1 >= bound0 ? 1 : 0;
    for (int pass = 0; pass < 2; ++pass) {
      const std::uint8_t val = pass == 0 ? first : static_cast<std::uint8_t>(1 - first);
      const double bound = val ? bound1 : bound0;
      if (bound < best - slack()) continue;
      x[k] = val;
      if (val) {
        dfs(k + 1, score + gain1, optimism - settled);
      } else {
        dfs(k + 1, score, optimism - settled - killed);
      }
    }
    x[k] = 0;
  }
};

map_result icm(const conditioned_model& cm, const map_config& cfg, rng& gen) {
  const auto t0 = clock_type::now();
  std::vector<std::vector<std::pair<std::size_t, double>>> nbrs(cm.n);
  for (const auto& p : cm.pairs) {
    nbrs[p.i].emplace_back(p.j, p.w);
    nbrs[p.j].emplace_back(p.i, p.w);
  }
  map_result best;
  best.score = -std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> x(cm.n);
  const std::size_t restarts = std::max<std::size_t>(1, cfg.max_restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    if (r > 0 && over_budget(t0, cfg.time_budget)) break;
    for (auto& b : x) b = gen.bernoulli(0.5) ? 1 : 0;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = 0; i < cm.n; ++i) {
        double gain = cm.unary[i];
        for (const auto& [j, w] : nbrs[i]) {
          if (x[j]) gain += w;
        }
        const std::uint8_t v = gain > 0.0 ? 1 : 0;
        if (v != x[i]) {
          x[i] = v;
          changed = true;
        }
      }
    }
    const double s = cm.score(x);
    if (s > best.score) {
      best.score = s;
      best.assignment = x;
    }
  }
  best.exact = false;
  return best;
}

}  // namespace

map_result map_assignment(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence, const map_config& cfg,
                          rng& gen) {
  const conditioned_model cm = condition_on_evidence(mrf, evidence);
  if (cfg.mode != map_mode::icm && cm.n > max_exact_map_labels) {
    throw std::invalid_argument("map_assignment: exact mode supports at most " +
                                std::to_string(max_exact_map_labels) + " labels");
  }
  map_result out;
  if (cfg.mode == map_mode::icm) {
    out = icm(cm, cfg, gen);
  } else {
    bnb_search search(cm, cfg.time_budget);
    search.dfs(0, cm.constant, search.initial_optimism());
    if (search.best_x.empty()) {
      // Timed out before reaching a leaf; fall back to local search.
      out = icm(cm, {map_mode::icm, cfg.time_budget, 1}, gen);
    } else {
      out.assignment = search.best_x;
      out.exact = !search.timed_out;
    }
  }
  // Reported on the full model so it is comparable across evidence settings.
  std::vector<std::uint8_t> full(out.assignment);
  full.insert(full.end(), evidence.begin(), evidence.end());
  out.score = mrf.score(full);
  return out;
}

// ---------------------------------------------------------------------------

drf_prediction drf_predict(const pairwise_mrf& mrf, std::span<const double> e_continuous, const drf_config& cfg,
                           rng& gen) {
  if (e_continuous.size() != mrf.n_e()) {
    throw std::invalid_argument("drf_predict: expected " + std::to_string(mrf.n_e()) + " evidence values, got " +
                                std::to_string(e_continuous.size()));
  }
  const auto ev = binarize(e_continuous, cfg.tau_e);
  drf_prediction out;
  switch (cfg.method) {
    case inference_method::gibbs:
      out.marginals = gibbs_marginals(mrf, ev, cfg.gibbs, gen);
      break;
    case inference_method::bp:
      out.marginals = bp_marginals(mrf, ev, cfg.bp);
      break;
    case inference_method::exact:
      out.marginals = exact_marginals(mrf, ev);
      break;
    case inference_method::map: {
      const auto t0 = clock_type::now();
      out.map = map_assignment(mrf, ev, cfg.map, gen);
      out.marginals.method = inference_method::map;
      out.marginals.p.assign(out.map->assignment.begin(), out.map->assignment.end());
      out.marginals.iterations = 1;
      out.marginals.wall_ms = elapsed_ms(t0);
      break;
    }
  }
  return out;
}

}  // namespace ddn
