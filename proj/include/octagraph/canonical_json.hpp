#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>

namespace octagraph {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kFormatVersion = "1";

/// Compact serialization in insertion order with a trailing newline. With
/// `fixed_decimals`, every floating-point value is printed in fixed notation
/// with that many decimals; otherwise the shortest round-trip form is used.
std::string dump_canonical(const Json& value, std::optional<int> fixed_decimals = std::nullopt);

Json parse_json(std::string_view text);

/// Rounds to `decimals` places so that a fixed-notation dump parses back to the same double.
double quantize(double value, int decimals = 6);

// Schema helpers: all failures raise SchemaViolation.
[[noreturn]] void throw_schema(const std::string& message);
const Json& require(const Json& object, std::string_view key);
void require_version(const Json& object);

template <typename T>
T read_as(const Json& object, std::string_view key) {
    const Json& v = require(object, key);
    try {
        return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw_schema("field '" + std::string(key) + "': " + e.what());
    }
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace octagraph
