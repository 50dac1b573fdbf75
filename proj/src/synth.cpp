#include "octagraph/synth.hpp"

#include "octagraph/error.hpp"
#include "octagraph/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace octagraph {

namespace {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(engine_() >> 11) * 0x1.0p-53); }
    double uniform(const Range& r) { return uniform(r.lo, r.hi); }
    bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
    int integer(const Range& r) {
        const int lo = static_cast<int>(std::ceil(r.lo));
        const int hi = static_cast<int>(std::floor(r.hi));
        return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::mt19937_64 engine_;
};

struct Point {
    double row;
    double col;
};

void stamp(BinaryMask& m, double row, double col, double radius) {
    const int r0 = static_cast<int>(std::floor(row - radius));
    const int r1 = static_cast<int>(std::ceil(row + radius));
    const int c0 = static_cast<int>(std::floor(col - radius));
    const int c1 = static_cast<int>(std::ceil(col + radius));
    const double r2 = radius * radius;
    for (int r = std::max(r0, 0); r <= std::min(r1, m.height - 1); ++r) {
        for (int c = std::max(c0, 0); c <= std::min(c1, m.width - 1); ++c) {
            const double dr = r - row;
            const double dc = c - col;
            if (dr * dr + dc * dc <= r2) m.set(r, c, true);
        }
    }
}

// Quadratic Bezier stroke with the control point bowed sideways by `bow` (fraction of length).
void stroke(BinaryMask& m, Point a, Point b, double bow, double width) {
    const double dr = b.row - a.row;
    const double dc = b.col - a.col;
    const double len = std::hypot(dr, dc);
    if (len == 0.0) return;
    const Point ctrl{(a.row + b.row) / 2 - dc / len * bow * len, (a.col + b.col) / 2 + dr / len * bow * len};
    const int samples = static_cast<int>(std::ceil(len * 2.5)) + 1;
    for (int i = 0; i <= samples; ++i) {
        const double t = static_cast<double>(i) / samples;
        const double u = 1 - t;
        stamp(m, u * u * a.row + 2 * u * t * ctrl.row + t * t * b.row, u * u * a.col + 2 * u * t * ctrl.col + t * t * b.col,
              width / 2);
    }
}

void check_range(const Range& r, double min, const char* what) {
    if (!(r.lo >= min) || !(r.hi >= r.lo) || !std::isfinite(r.hi)) {
        throw Error(ErrorCode::InvalidSpec, std::string(what) + " range is invalid");
    }
}

std::string pad5(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", i);
    return buf;
}

}  // namespace

void SynthSpec::validate() const {
    if (height < kMinSynthSide || width < kMinSynthSide) {
        throw Error(ErrorCode::InvalidSpec, "synthetic masks must be at least 64x64, got " + std::to_string(height) + "x" +
                                                std::to_string(width));
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorCode::InvalidSpec, "dropout_rate must be in [0, 1)");
    if (label < 0 || label >= kNumClasses) throw Error(ErrorCode::InvalidSpec, "label out of range");
    if (!(lattice_spacing >= 4.0)) throw Error(ErrorCode::InvalidSpec, "lattice_spacing must be >= 4");
    if (!(jitter >= 0.0) || jitter >= lattice_spacing / 2) throw Error(ErrorCode::InvalidSpec, "jitter must be in [0, spacing/2)");
    check_range(branch_count, 0.0, "branch_count");
    check_range(branch_length, 0.0, "branch_length");
    check_range(vessel_width, 1.0, "vessel_width");
    check_range(faz_radius, 0.0, "faz_radius");
    if (std::floor(branch_count.hi) < std::ceil(branch_count.lo)) throw Error(ErrorCode::InvalidSpec, "branch_count has no integer");
}

SynthSpec SynthSpec::for_class(int label, std::uint64_t seed, int height, int width) {
    SynthSpec s;
    s.height = height;
    s.width = width;
    s.label = label;
    s.seed = seed;
    const double scale = std::min(height, width) / static_cast<double>(kDefaultSynthSide);
    s.lattice_spacing = 40.0 * scale;
    s.jitter = 6.0 * scale;
    s.branch_length = {10.0 * scale, 22.0 * scale};
    switch (label) {
        case 0:
            s.dropout_rate = 0.02;
            s.faz_radius = {16.0, 22.0};
            break;
        case 1:
            s.dropout_rate = 0.15;
            s.faz_radius = {26.0, 34.0};
            break;
        case 2:
            s.dropout_rate = 0.30;
            s.faz_radius = {38.0, 48.0};
            break;
        default: throw Error(ErrorCode::InvalidSpec, "label out of range");
    }
    s.faz_radius.lo *= scale;
    s.faz_radius.hi *= scale;
    return s;
}

SynthMask generate_mask(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    BinaryMask m(spec.height, spec.width);
    const double s = spec.lattice_spacing;

    // Lattice extends half a cell past every border so vessels cross the frame.
    const int rows = static_cast<int>(std::ceil((spec.height + s) / s)) + 1;
    const int cols = static_cast<int>(std::ceil((spec.width + s) / s)) + 1;
    std::vector<Point> grid(static_cast<std::size_t>(rows) * cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            grid[static_cast<std::size_t>(i) * cols + j] = {-s / 2 + i * s + rng.uniform(-spec.jitter, spec.jitter),
                                                            -s / 2 + j * s + rng.uniform(-spec.jitter, spec.jitter)};
        }
    }
    const auto at = [&](int i, int j) { return grid[static_cast<std::size_t>(i) * cols + j]; };
    const auto segment = [&](Point a, Point b) {
        // Every draw happens whether or not the stroke is dropped, so the
        // geometry of kept strokes does not depend on the dropout rate.
        const bool dropped = rng.bernoulli(spec.dropout_rate);
        const double bow = rng.uniform(-0.2, 0.2);
        const double width = rng.uniform(spec.vessel_width);
        if (!dropped) stroke(m, a, b, bow, width);
    };
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            if (j + 1 < cols) segment(at(i, j), at(i, j + 1));
            if (i + 1 < rows) segment(at(i, j), at(i + 1, j));
        }
    }

    const int branches = rng.integer(spec.branch_count);
    for (int b = 0; b < branches; ++b) {
        const Point p{rng.uniform(0.0, spec.height - 1.0), rng.uniform(0.0, spec.width - 1.0)};
        const double angle = rng.uniform(0.0, 2 * std::numbers::pi);
        const double len = rng.uniform(spec.branch_length);
        const double bow = rng.uniform(-0.2, 0.2);
        const double width = rng.uniform(spec.vessel_width.lo, (spec.vessel_width.lo + spec.vessel_width.hi) / 2);
        stroke(m, p, {p.row + len * std::sin(angle), p.col + len * std::cos(angle)}, bow, width);
    }

    const double cr = spec.height / 2.0 + rng.uniform(-6.0, 6.0) * spec.height / kDefaultSynthSide;
    const double cc = spec.width / 2.0 + rng.uniform(-6.0, 6.0) * spec.width / kDefaultSynthSide;
    const double radius = rng.uniform(spec.faz_radius);
    for (int r = 0; r < m.height; ++r) {
        for (int c = 0; c < m.width; ++c) {
            if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius) m.set(r, c, false);
        }
    }
    return {std::move(m), spec.label};
}

std::string encode_manifest(const Manifest& manifest) {
    Json j;
    j["version"] = kFormatVersion;
    Json entries = Json::array();
    for (const ManifestEntry& e : manifest.entries) {
        Json r;
        r["source_id"] = e.source_id;
        r["path"] = e.path;
        r["label"] = e.label ? Json(*e.label) : Json(nullptr);
        entries.push_back(std::move(r));
    }
    j["entries"] = std::move(entries);
    return dump_canonical(j);
}

Manifest decode_manifest(std::string_view bytes) {
    const Json j = parse_json(bytes);
    require_version(j);
    const Json& entries = require(j, "entries");
    if (!entries.is_array()) throw_schema("entries must be an array");
    Manifest m;
    for (const Json& r : entries) {
        ManifestEntry e;
        e.source_id = read_as<std::string>(r, "source_id");
        e.path = read_as<std::string>(r, "path");
        if (e.source_id.empty()) throw_schema("empty source_id");
        const Json& label = require(r, "label");
        if (label.is_string()) {
            try {
                e.label = parse_class(label.get<std::string>());
            } catch (const Error& err) {
                throw_schema(err.what());
            }
        } else if (!label.is_null()) {
            const int c = read_as<int>(r, "label");
            if (c < 0 || c >= kNumClasses) throw_schema("label out of range for '" + e.source_id + "'");
            e.label = c;
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path) { return decode_manifest(read_file(path.string())); }

std::filesystem::path resolve_entry(const std::filesystem::path& manifest_path, const ManifestEntry& entry) {
    const std::filesystem::path p(entry.path);
    return p.is_absolute() ? p : manifest_path.parent_path() / p;
}

Manifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir) {
    for (int c : config.counts) {
        if (c < 0) throw Error(ErrorCode::InvalidSpec, "class counts must be >= 0");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + out_dir.string() + "': " + ec.message());

    Manifest manifest;
    for (int label = 0; label < kNumClasses; ++label) {
        for (int k = 0; k < config.counts[label]; ++k) {
            const std::string id = config.prefix + "_" + pad5(manifest.entries.size());
            manifest.entries.push_back({id, id + ".pgm", label});
        }
    }
    parallel_for(manifest.entries.size(), config.workers > 0 ? config.workers : default_workers(), [&](std::size_t i) {
        const ManifestEntry& e = manifest.entries[i];
        const SynthSpec spec = SynthSpec::for_class(*e.label, config.seed + i, config.height, config.width);
        write_pgm(out_dir / e.path, to_gray(generate_mask(spec).mask));
    });
    write_file((out_dir / "manifest.json").string(), encode_manifest(manifest));
    return manifest;
}

}  // namespace octagraph
