#include "ddn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>

namespace ddn {

void dataset::validate() const {
  std::set<std::string> ids;
  for (const auto& ex : examples) {
    if (ex.v.size() != d) throw std::invalid_argument("dataset: example '" + ex.id + "' has wrong feature count");
    if (ex.x.size() != n) throw std::invalid_argument("dataset: example '" + ex.id + "' has wrong label count");
    for (auto b : ex.x) {
      if (b > 1) throw std::invalid_argument("dataset: example '" + ex.id + "' has a non-binary label");
    }
    if (!ids.insert(ex.id).second) throw std::invalid_argument("dataset: duplicate id '" + ex.id + "'");
  }
  if (!label_names.empty() && label_names.size() != n) {
    throw std::invalid_argument("dataset: label_names has wrong length");
  }
}

binary_matrix dataset::labels() const {
  binary_matrix out(examples.size(), n);
  for (std::size_t r = 0; r < examples.size(); ++r) {
    std::copy(examples[r].x.begin(), examples[r].x.end(), out.row(r).begin());
  }
  return out;
}

std::vector<vec> dataset::features() const {
  std::vector<vec> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.v);
  return out;
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

bool parse_size(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::pair<std::size_t, std::size_t> parse_header(const std::string& line) {
  // #ddn v1 d=<d> n=<n>
  const auto parts = split(line, ' ');
  std::size_t d = 0;
  std::size_t n = 0;
  if (parts.size() != 4 || parts[0] != "#ddn" || parts[1] != "v1" || !parts[2].starts_with("d=") ||
      !parts[3].starts_with("n=") || !parse_size(parts[2].substr(2), d) || !parse_size(parts[3].substr(2), n)) {
    throw format_error(1, "malformed header, expected '#ddn v1 d=<d> n=<n>'");
  }
  return {d, n};
}

}  // namespace

dataset parse_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw format_error(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  dataset data;
  std::tie(data.d, data.n) = parse_header(line);
  std::set<std::string> ids;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw format_error(lineno, "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    example ex;
    ex.id = std::string(fields[0]);
    if (ex.id.empty()) throw format_error(lineno, "empty id");
    if (!ids.insert(ex.id).second) throw format_error(lineno, "duplicate id '" + ex.id + "'");
    if (data.d > 0 || !fields[1].empty()) {
      const auto feats = split(fields[1], ',');
      if (feats.size() != data.d) {
        throw format_error(lineno, "expected " + std::to_string(data.d) + " features, found " +
                                       std::to_string(feats.size()));
      }
      for (const auto f : feats) {
        double val = 0.0;
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), val);
        if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(val)) {
          throw format_error(lineno, "non-numeric feature '" + std::string(f) + "'");
        }
        ex.v.push_back(val);
      }
    }
    if (data.n > 0 || !fields[2].empty()) {
      const auto labs = split(fields[2], ',');
      if (labs.size() != data.n) {
        throw format_error(lineno, "expected " + std::to_string(data.n) + " labels, found " +
                                       std::to_string(labs.size()));
      }
      for (const auto l : labs) {
        if (l != "0" && l != "1") throw format_error(lineno, "non-binary label '" + std::string(l) + "'");
        ex.x.push_back(l == "1" ? 1 : 0);
      }
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  return parse_dataset(in);
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

void write_dataset(std::ostream& out, const dataset& data) {
  out << "#ddn v1 d=" << data.d << " n=" << data.n << '\n';
  for (const auto& ex : data.examples) {
    out << ex.id << '\t';
    for (std::size_t j = 0; j < ex.v.size(); ++j) out << (j ? "," : "") << format_double(ex.v[j]);
    out << '\t';
    for (std::size_t j = 0; j < ex.x.size(); ++j) out << (j ? "," : "") << static_cast<int>(ex.x[j]);
    out << '\n';
  }
}

void save_dataset(const dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset '" + path.string() + "'");
  write_dataset(out, data);
}

dataset gen_planted_mrf_dataset(rng& gen, const planted_spec& spec, std::size_t m) {
  const std::size_t n = spec.n_labels;
  if (n > max_planted_labels) {
    throw std::invalid_argument("gen_planted_mrf_dataset: at most " + std::to_string(max_planted_labels) +
                                " labels can be enumerated");
  }
  if (spec.edge_weights.size() != spec.edges.size()) {
    throw std::invalid_argument("gen_planted_mrf_dataset: one weight per edge required");
  }
  if (!spec.unary_weights.empty() && spec.unary_weights.size() != n) {
    throw std::invalid_argument("gen_planted_mrf_dataset: unary weights must cover every label");
  }
  for (const auto& [a, b] : spec.edges) {
    if (a >= n || b >= n || a == b) throw std::invalid_argument("gen_planted_mrf_dataset: invalid edge");
  }

  const std::size_t total = std::size_t{1} << n;
  vec logp(total);
  for (std::size_t s = 0; s < total; ++s) {
    double score = 0.0;
    for (std::size_t i = 0; i < spec.unary_weights.size(); ++i) {
      if ((s >> i) & 1U) score += spec.unary_weights[i];
    }
    for (std::size_t k = 0; k < spec.edges.size(); ++k) {
      const auto [a, b] = spec.edges[k];
      if (((s >> a) & 1U) && ((s >> b) & 1U)) score += spec.edge_weights[k];
    }
    logp[s] = score;
  }
  const double log_z = log_sum_exp(logp);
  vec cdf(total);
  double acc = 0.0;
  for (std::size_t s = 0; s < total; ++s) {
    acc += std::exp(logp[s] - log_z);
    cdf[s] = acc;
  }

  dataset data;
  data.n = n;
  data.d = spec.feature_noise >= 0.0 ? n : 0;
  data.examples.reserve(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double u = gen.uniform() * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t s = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), total - 1);
    example ex;
    ex.id = "s" + std::to_string(r);
    ex.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) ex.x[i] = (s >> i) & 1U;
    if (data.d > 0) {
      ex.v.resize(n);
      for (std::size_t i = 0; i < n; ++i) ex.v[i] = ex.x[i] + spec.feature_noise * gen.normal();
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

}  // namespace ddn
