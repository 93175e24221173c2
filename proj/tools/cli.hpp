#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ddn/numeric.hpp"

namespace ddn::cli {

/// Predictions file:
///   #ddn-pred v1 n=<n>
///   <id>\t<p_1,...,p_n>
struct predictions {
  std::size_t n = 0;
  std::vector<std::string> ids;
  std::vector<vec> p;
};

predictions parse_predictions(std::istream& in);
predictions load_predictions(const std::filesystem::path& path);
void write_predictions(std::ostream& out, const predictions& preds);

/// Runs one command; `args` excludes the program name. Returns the exit code:
/// 0 success, 1 runtime or numerical failure, 2 usage or validation error.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace ddn::cli
