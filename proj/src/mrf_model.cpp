#include <algorithm>
#include <stdexcept>

#include "ddn/mrf.hpp"

namespace ddn {

pairwise_mrf::pairwise_mrf(std::size_t n_x, std::size_t n_e, std::size_t neighbor_cap)
    : n_x_(n_x), n_e_(n_e), neighbor_cap_(neighbor_cap), incident_(n_x + n_e), neighbors_(n_x + n_e) {}

void pairwise_mrf::check_node(std::size_t j) const {
  if (j >= node_count()) {
    throw std::out_of_range("pairwise_mrf: node " + std::to_string(j) + " out of range");
  }
}

std::size_t pairwise_mrf::add_unary(std::size_t node, double weight) {
  check_node(node);
  const std::size_t k = features_.size();
  features_.push_back({node, mrf_feature::none});
  weights_.push_back(weight);
  incident_[node].push_back(k);
  return k;
}

std::size_t pairwise_mrf::add_pair(std::size_t a, std::size_t b, double weight) {
  check_node(a);
  check_node(b);
  if (a == b) throw std::invalid_argument("pairwise_mrf: self edge");
  if (a > b) std::swap(a, b);
  if (std::find(neighbors_[a].begin(), neighbors_[a].end(), b) != neighbors_[a].end()) {
    throw std::invalid_argument("pairwise_mrf: duplicate edge");
  }
  if (neighbors_[a].size() >= neighbor_cap_ || neighbors_[b].size() >= neighbor_cap_) {
    throw std::invalid_argument("pairwise_mrf: neighbor cap exceeded");
  }
  const std::size_t k = features_.size();
  features_.push_back({a, b});
  weights_.push_back(weight);
  incident_[a].push_back(k);
  incident_[b].push_back(k);
  neighbors_[a].push_back(b);
  neighbors_[b].push_back(a);
  return k;
}

std::vector<edge> pairwise_mrf::edges() const {
  std::vector<edge> out;
  for (const auto& f : features_) {
    if (f.is_pair()) out.emplace_back(f.a, f.b);
  }
  return out;
}

double pairwise_mrf::score(std::span<const std::uint8_t> state) const {
  if (state.size() != node_count()) throw std::invalid_argument("pairwise_mrf::score: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < features_.size(); ++k) {
    const auto& f = features_[k];
    if (state[f.a] && (!f.is_pair() || state[f.b])) s += weights_[k];
  }
  return s;
}

double pairwise_mrf::conditional_logit(std::size_t j, std::span<const std::uint8_t> state) const {
  double z = 0.0;
  for (auto k : incident_[j]) {
    const auto& f = features_[k];
    if (!f.is_pair()) {
      z += weights_[k];
    } else {
      const std::size_t other = (f.a == j) ? f.b : f.a;
      if (state[other]) z += weights_[k];
    }
  }
  return z;
}

double conditioned_model::score(std::span<const std::uint8_t> x) const {
  double s = constant;
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i]) s += unary[i];
  }
  for (const auto& p : pairs) {
    if (x[p.i] && x[p.j]) s += p.w;
  }
  return s;
}

conditioned_model condition_on_evidence(const pairwise_mrf& mrf, std::span<const std::uint8_t> evidence) {
  if (evidence.size() != mrf.n_e()) {
    throw std::invalid_argument("condition_on_evidence: expected " + std::to_string(mrf.n_e()) +
                                " evidence bits, got " + std::to_string(evidence.size()));
  }
  const std::size_t nx = mrf.n_x();
  conditioned_model cm;
  cm.n = nx;
  cm.unary.assign(nx, 0.0);
  auto ev = [&](std::size_t node) { return evidence[node - nx] != 0; };
  const auto& feats = mrf.features();
  const auto& w = mrf.weights();
  for (std::size_t k = 0; k < feats.size(); ++k) {
    const auto& f = feats[k];
    const bool a_label = f.a < nx;
    if (!f.is_pair()) {
      if (a_label) {
        cm.unary[f.a] += w[k];
      } else if (ev(f.a)) {
        cm.constant += w[k];
      }
      continue;
    }
    const bool b_label = f.b < nx;
    if (a_label && b_label) {
      cm.pairs.push_back({f.a, f.b, w[k]});
    } else if (a_label) {
      if (ev(f.b)) cm.unary[f.a] += w[k];
    } else if (b_label) {
      if (ev(f.a)) cm.unary[f.b] += w[k];
    } else if (ev(f.a) && ev(f.b)) {
      cm.constant += w[k];
    }
  }
  return cm;
}

std::vector<std::uint8_t> binarize(std::span<const double> e, double tau) {
  std::vector<std::uint8_t> out(e.size());
  for (std::size_t j = 0; j < e.size(); ++j) out[j] = e[j] > tau ? 1 : 0;
  return out;
}

std::string to_string(inference_method m) {
  switch (m) {
    case inference_method::gibbs: return "gibbs";
    case inference_method::bp: return "bp";
    case inference_method::exact: return "exact";
    case inference_method::map: return "map";
  }
  return "unknown";
}

}  // namespace ddn
