#include "ddn/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ddn {

namespace {

void check_shape(const score_matrix& s, const binary_matrix& t) {
  if (s.rows != t.rows || s.cols != t.cols) {
    throw std::invalid_argument("metrics: score matrix is " + std::to_string(s.rows) + "x" + std::to_string(s.cols) +
                                " but truth is " + std::to_string(t.rows) + "x" + std::to_string(t.cols));
  }
}

double safe_ratio(double num, double den, bool empty_is_one) {
  if (den > 0.0) return num / den;
  return empty_is_one ? 1.0 : 0.0;
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

binary_matrix threshold_predictions(const score_matrix& scores, double threshold) {
  binary_matrix out(scores.rows, scores.cols);
  for (std::size_t k = 0; k < scores.values.size(); ++k) out.bits[k] = scores.values[k] > threshold ? 1 : 0;
  return out;
}

binary_matrix top_k_predictions(const score_matrix& scores, std::size_t k) {
  binary_matrix out(scores.rows, scores.cols);
  std::vector<std::size_t> idx(scores.cols);
  const std::size_t take = std::min(k, scores.cols);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores.at(r, a) > scores.at(r, b); });
    for (std::size_t q = 0; q < take; ++q) out.at(r, idx[q]) = 1;
  }
  return out;
}

double subset_accuracy(const score_matrix& scores, const binary_matrix& truth, double threshold) {
  check_shape(scores, truth);
  if (scores.rows == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < scores.rows; ++r) {
    bool same = true;
    for (std::size_t c = 0; c < scores.cols && same; ++c) {
      same = (scores.at(r, c) > threshold ? 1 : 0) == truth.at(r, c);
    }
    hits += same ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.rows);
}

double jaccard_index(const score_matrix& scores, const binary_matrix& truth, double threshold) {
  check_shape(scores, truth);
  if (scores.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < scores.rows; ++r) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t c = 0; c < scores.cols; ++c) {
      const bool p = scores.at(r, c) > threshold;
      const bool t = truth.at(r, c) != 0;
      inter += (p && t) ? 1 : 0;
      uni += (p || t) ? 1 : 0;
    }
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return total / static_cast<double>(scores.rows);
}

double mean_average_precision(const score_matrix& scores, const binary_matrix& truth,
                              std::vector<std::size_t>* skipped) {
  check_shape(scores, truth);
  double total = 0.0;
  std::size_t counted = 0;
  std::vector<std::size_t> order(scores.rows);
  for (std::size_t c = 0; c < scores.cols; ++c) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores.at(a, c) > scores.at(b, c);
    });
    // Walk tie groups; every positive in a group sees the counts at the
    // group's end.
    std::size_t seen = 0;
    std::size_t seen_pos = 0;
    double ap = 0.0;
    std::size_t q = 0;
    while (q < order.size()) {
      std::size_t end = q;
      std::size_t group_pos = 0;
      while (end < order.size() && scores.at(order[end], c) == scores.at(order[q], c)) {
        group_pos += truth.at(order[end], c);
        ++end;
      }
      seen += end - q;
      seen_pos += group_pos;
      ap += static_cast<double>(group_pos) * static_cast<double>(seen_pos) / static_cast<double>(seen);
      q = end;
    }
    if (seen_pos == 0) {
      if (skipped != nullptr) skipped->push_back(c);
      continue;
    }
    total += ap / static_cast<double>(seen_pos);
    ++counted;
  }
  return counted > 0 ? total / static_cast<double>(counted) : 0.0;
}

double lrap(const score_matrix& scores, const binary_matrix& truth) {
  check_shape(scores, truth);
  if (scores.rows == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < scores.rows; ++r) {
    std::size_t n_true = 0;
    double acc = 0.0;
    for (std::size_t l = 0; l < scores.cols; ++l) {
      if (!truth.at(r, l)) continue;
      ++n_true;
      const double s = scores.at(r, l);
      std::size_t above = 0;
      std::size_t above_true = 0;
      for (std::size_t j = 0; j < scores.cols; ++j) {
        if (scores.at(r, j) >= s) {
          ++above;
          above_true += truth.at(r, j);
        }
      }
      acc += static_cast<double>(above_true) / static_cast<double>(above);
    }
    total += n_true > 0 ? acc / static_cast<double>(n_true) : 1.0;
  }
  return total / static_cast<double>(scores.rows);
}

prf prf_from_predictions(const binary_matrix& pred, const binary_matrix& truth) {
  if (pred.rows != truth.rows || pred.cols != truth.cols) throw std::invalid_argument("prf: shape mismatch");
  prf out;
  std::size_t tp_all = 0, np_all = 0, nt_all = 0;
  double cp = 0.0, cr = 0.0;
  for (std::size_t c = 0; c < pred.cols; ++c) {
    std::size_t tp = 0, np = 0, nt = 0;
    for (std::size_t r = 0; r < pred.rows; ++r) {
      const bool p = pred.at(r, c) != 0;
      const bool t = truth.at(r, c) != 0;
      tp += (p && t) ? 1 : 0;
      np += p ? 1 : 0;
      nt += t ? 1 : 0;
    }
    cp += safe_ratio(static_cast<double>(tp), static_cast<double>(np), nt == 0);
    cr += safe_ratio(static_cast<double>(tp), static_cast<double>(nt), np == 0);
    tp_all += tp;
    np_all += np;
    nt_all += nt;
  }
  if (pred.cols > 0) {
    out.cp = cp / static_cast<double>(pred.cols);
    out.cr = cr / static_cast<double>(pred.cols);
  }
  out.cf1 = harmonic(out.cp, out.cr);
  out.op = safe_ratio(static_cast<double>(tp_all), static_cast<double>(np_all), nt_all == 0);
  out.or_ = safe_ratio(static_cast<double>(tp_all), static_cast<double>(nt_all), np_all == 0);
  out.of1 = harmonic(out.op, out.or_);
  return out;
}

prf_report prf_suite(const score_matrix& scores, const binary_matrix& truth, double threshold, std::size_t k) {
  check_shape(scores, truth);
  return {prf_from_predictions(threshold_predictions(scores, threshold), truth),
          prf_from_predictions(top_k_predictions(scores, k), truth)};
}

std::vector<std::pair<std::string, double>> metric_report::entries() const {
  std::vector<std::pair<std::string, double>> e{{"map", map}, {"lrap", lrap}, {"sa", sa}, {"ji", ji},
                                                {"threshold", threshold}};
  if (prf) {
    auto add = [&](const std::string& suffix, const ddn::prf& p) {
      e.emplace_back("cp" + suffix, p.cp);
      e.emplace_back("cr" + suffix, p.cr);
      e.emplace_back("cf1" + suffix, p.cf1);
      e.emplace_back("op" + suffix, p.op);
      e.emplace_back("or" + suffix, p.or_);
      e.emplace_back("of1" + suffix, p.of1);
    };
    add("", prf->at_threshold);
    add("_top" + std::to_string(top_k), prf->top_k);
  }
  return e;
}

std::string metric_report::to_text() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries()) {
    char line[64];
    std::snprintf(line, sizeof(line), "%-12s %.6f\n", k.c_str(), v);
    os << line;
  }
  return os.str();
}

metric_report evaluate(const score_matrix& scores, const binary_matrix& truth, double threshold,
                       std::optional<std::size_t> top_k) {
  metric_report rep;
  rep.threshold = threshold;
  rep.map = mean_average_precision(scores, truth, &rep.skipped_labels);
  rep.lrap = lrap(scores, truth);
  rep.sa = subset_accuracy(scores, truth, threshold);
  rep.ji = jaccard_index(scores, truth, threshold);
  if (top_k) {
    rep.top_k = *top_k;
    rep.prf = prf_suite(scores, truth, threshold, *top_k);
  }
  return rep;
}

}  // namespace ddn
