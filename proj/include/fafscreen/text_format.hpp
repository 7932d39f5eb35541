#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace faf {

/// Shortest-is-not-enough formatting: always 17 significant digits, so every
/// finite binary64 value survives a text round trip bit-exactly.
std::string format_double(double value);

/// Strict decimal parse of the whole token; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view token);

/// Serializes JSON with floating-point numbers written by format_double.
/// Object keys keep nlohmann's (sorted) order, so output is canonical.
std::string dump_json(const nlohmann::json& value, int indent = -1);

std::vector<std::string> split_csv_line(std::string_view line);
std::string_view trim(std::string_view text);

}  // namespace faf
