#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ddn/mrf.hpp"
#include "ddn/numeric.hpp"

namespace ddn {

struct example {
  std::string id;
  vec v;
  std::vector<std::uint8_t> x;

  friend bool operator==(const example&, const example&) = default;
};

struct dataset {
  std::size_t d = 0;
  std::size_t n = 0;
  std::vector<example> examples;
  std::vector<std::string> label_names;

  std::size_t size() const { return examples.size(); }
  /// Checks every example against (d, n), binary labels and unique ids.
  void validate() const;
  binary_matrix labels() const;
  std::vector<vec> features() const;

  friend bool operator==(const dataset&, const dataset&) = default;
};

/// Parse failure; `line()` is 1-based.
class format_error : public std::runtime_error {
 public:
  format_error(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Text format:
///   #ddn v1 d=<d> n=<n>
///   <id>\t<f_1,...,f_d>\t<l_1,...,l_n>
/// Empty lines are skipped; the trailing newline is optional.
dataset parse_dataset(std::istream& in);
dataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const dataset& data);
void save_dataset(const dataset& data, const std::filesystem::path& path);

/// Shortest decimal form that reads back to the same double.
std::string format_double(double x);

/// Pairwise model over n_labels binary labels used to plant structure.
struct planted_spec {
  std::size_t n_labels = 0;
  std::vector<edge> edges;
  vec edge_weights;
  /// Empty means all zero.
  vec unary_weights;
  /// Negative: no features (d = 0). Otherwise d = n and v_j = x_j + N(0, noise).
  double feature_noise = -1.0;
};

inline constexpr std::size_t max_planted_labels = 16;

/// m examples drawn i.i.d. from the exact joint of the planted model,
/// enumerated over all 2^n assignments.
dataset gen_planted_mrf_dataset(rng& gen, const planted_spec& spec, std::size_t m);

}  // namespace ddn
