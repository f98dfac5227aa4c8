#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace docstep {

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

// Canonical serialization: object keys sorted, no insignificant whitespace.
std::string canonical_json(const nlohmann::json& value);

std::string base64_encode(std::string_view bytes);

}  // namespace docstep
