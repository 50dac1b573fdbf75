#include "octagraph/canonical_json.hpp"

#include "octagraph/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace octagraph {

namespace {

void write_value(const Json& v, int decimals, std::string& out) {
    switch (v.type()) {
        case Json::value_t::object: {
            out.push_back('{');
            bool first = true;
            for (const auto& [key, item] : v.items()) {
                if (!first) out.push_back(',');
                first = false;
                out += Json(key).dump();
                out.push_back(':');
                write_value(item, decimals, out);
            }
            out.push_back('}');
            break;
        }
        case Json::value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& item : v) {
                if (!first) out.push_back(',');
                first = false;
                write_value(item, decimals, out);
            }
            out.push_back(']');
            break;
        }
        case Json::value_t::number_float: {
            double x = v.get<double>();
            if (!std::isfinite(x)) {
                out += "null";
                break;
            }
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
            std::string text(buf);
            if (text.find_first_not_of("-0.") == std::string::npos && text.front() == '-') text.erase(0, 1);
            out += text;
            break;
        }
        default:
            out += v.dump();
    }
}

}  // namespace

std::string dump_canonical(const Json& value, std::optional<int> fixed_decimals) {
    std::string out;
    if (fixed_decimals) {
        write_value(value, *fixed_decimals, out);
    } else {
        out = value.dump();
    }
    out.push_back('\n');
    return out;
}

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw_schema(std::string("invalid JSON: ") + e.what());
    }
}

double quantize(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double q = std::round(value * scale) / scale;
    return q == 0.0 ? 0.0 : q;
}

void throw_schema(const std::string& message) { throw Error(ErrorCode::SchemaViolation, message); }

const Json& require(const Json& object, std::string_view key) {
    if (!object.is_object()) throw_schema("expected an object while looking for '" + std::string(key) + "'");
    const auto it = object.find(std::string(key));
    if (it == object.end()) throw_schema("missing key '" + std::string(key) + "'");
    return *it;
}

void require_version(const Json& object) {
    const Json& v = require(object, "version");
    if (!v.is_string()) throw_schema("version must be a string");
    if (v.get<std::string>() != kFormatVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "version '" + v.get<std::string>() + "' is not supported");
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

}  // namespace octagraph
