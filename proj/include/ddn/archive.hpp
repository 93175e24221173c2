#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>

#include "ddn/ddn_model.hpp"
#include "ddn/dn_head.hpp"
#include "ddn/mrf.hpp"

namespace ddn {

/// JSON archive:
///   { "format_version": 1,
///     "model_kind": "mrf" | "dn_lr" | "dn_mlp" | "ddn" | "backbone",
///     "dims": { "d": .., "m": .., "n": .. },
///     "payload": { ... } }
/// Doubles are written in shortest round-trip form, so a reload is bitwise.
inline constexpr int archive_format_version = 1;

enum class model_kind { mrf, dn_lr, dn_mlp, ddn, backbone };

std::string to_string(model_kind k);
model_kind model_kind_from_string(const std::string& s);

using model = std::variant<pairwise_mrf, conditional_dn, deep_dependency_network, backbone>;

model_kind kind_of(const model& m);

class archive_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string serialize_model(const model& m);
model deserialize_model(const std::string& text);

void save_model(const model& m, const std::filesystem::path& path);
model load_model(const std::filesystem::path& path);

}  // namespace ddn
