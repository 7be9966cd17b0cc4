#pragma once

#include <json.hpp>

#include <string>

namespace boxplain {

using Json = nlohmann::json;

/// Canonical text: keys sorted, two-space indent, doubles in shortest
/// round-trip form, trailing newline.
std::string canonical_json(const Json& value);

/// Single-line form of canonical_json, without the trailing newline.
std::string compact_json(const Json& value);

}  // namespace boxplain
