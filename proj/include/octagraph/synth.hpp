#pragma once

#include "octagraph/canonical_json.hpp"
#include "octagraph/mask.hpp"
#include "octagraph/vessel_graph.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace octagraph {

inline constexpr int kDefaultSynthSide = 304;
inline constexpr int kMinSynthSide = 64;

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Procedural vascular mask: a jittered lattice of curved strokes with free
/// branches, thinned by dropout and cleared around a central avascular disk.
struct SynthSpec {
    int height = kDefaultSynthSide;
    int width = kDefaultSynthSide;
    int label = 0;
    double lattice_spacing = 40.0;
    double jitter = 6.0;
    Range branch_count{4, 10};
    Range branch_length{10, 22};
    Range vessel_width{2.0, 3.5};
    double dropout_rate = 0.0;
    Range faz_radius{18, 24};
    std::uint64_t seed = 0;

    void validate() const;
    /// Class-typical morphology: dropout and FAZ size grow with severity.
    static SynthSpec for_class(int label, std::uint64_t seed, int height = kDefaultSynthSide,
                               int width = kDefaultSynthSide);
};

struct SynthMask {
    BinaryMask mask;
    int label = 0;
};

SynthMask generate_mask(const SynthSpec& spec);

struct ManifestEntry {
    std::string source_id;
    std::string path;  // relative to the manifest's directory unless absolute
    std::optional<int> label;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

std::string encode_manifest(const Manifest& manifest);
Manifest decode_manifest(std::string_view bytes);
Manifest load_manifest(const std::filesystem::path& path);
/// Entry path resolved against the manifest location.
std::filesystem::path resolve_entry(const std::filesystem::path& manifest_path, const ManifestEntry& entry);

struct DatasetConfig {
    std::array<int, kNumClasses> counts{};
    std::uint64_t seed = 7;
    int height = kDefaultSynthSide;
    int width = kDefaultSynthSide;
    std::string prefix = "synth";
    int workers = 0;  // 0: hardware concurrency
};

/// Writes <out_dir>/<source_id>.pgm per mask plus manifest.json. Mask i
/// (classes in Healthy, NPDR, PDR order) uses seed + i.
Manifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

}  // namespace octagraph
