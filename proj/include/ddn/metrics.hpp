#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ddn/mrf.hpp"
#include "ddn/numeric.hpp"

namespace ddn {

/// Rows are examples, columns labels.
struct score_matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  vec values;

  score_matrix() = default;
  score_matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

/// Fraction of rows whose thresholded prediction equals the truth exactly.
double subset_accuracy(const score_matrix& scores, const binary_matrix& truth, double threshold = 0.5);

/// Mean per-row |pred & true| / |pred | true|; a row with both sets empty
/// scores 1.
double jaccard_index(const score_matrix& scores, const binary_matrix& truth, double threshold = 0.5);

/// Macro mean over labels of average precision. Labels without positives are
/// skipped (their indices are appended to `skipped` when provided). Tied
/// scores share the worst rank of their group.
double mean_average_precision(const score_matrix& scores, const binary_matrix& truth,
                              std::vector<std::size_t>* skipped = nullptr);

/// Label ranking average precision. Tied scores share the worst rank of their
/// group; rows without true labels score 1.
double lrap(const score_matrix& scores, const binary_matrix& truth);

struct prf {
  double cp = 0, cr = 0, cf1 = 0, op = 0, or_ = 0, of1 = 0;
};

struct prf_report {
  prf at_threshold;
  prf top_k;
};

/// Per-class (macro) and overall (micro) precision/recall/F1. Precision with no
/// predictions is 1 if there are no positives, else 0; recall with no
/// positives is 1 if there are no predictions, else 0. CF1 and OF1 are the
/// harmonic means of the corresponding precision and recall. Top-k predicts
/// the k highest scores per row, ties broken by lower label index.
prf prf_from_predictions(const binary_matrix& pred, const binary_matrix& truth);
prf_report prf_suite(const score_matrix& scores, const binary_matrix& truth, double threshold, std::size_t k);

binary_matrix threshold_predictions(const score_matrix& scores, double threshold);
binary_matrix top_k_predictions(const score_matrix& scores, std::size_t k);

struct metric_report {
  double map = 0, lrap = 0, sa = 0, ji = 0;
  double threshold = 0.5;
  std::optional<prf_report> prf;
  std::size_t top_k = 0;
  std::vector<std::size_t> skipped_labels;

  /// Flat key/value view in a fixed order.
  std::vector<std::pair<std::string, double>> entries() const;
  /// Aligned two-column text.
  std::string to_text() const;
};

metric_report evaluate(const score_matrix& scores, const binary_matrix& truth, double threshold,
                       std::optional<std::size_t> top_k);

}  // namespace ddn
