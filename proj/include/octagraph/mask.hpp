#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace octagraph {

inline constexpr int kDefaultThreshold = 128;
inline constexpr int kMinMaskSide = 16;

struct Pixel {
    int row = 0;
    int col = 0;

    friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Row-major boolean raster; true marks a vessel pixel.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;
    std::string source_id;

    BinaryMask() = default;
    BinaryMask(int h, int w, std::string id = {})
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, 0), source_id(std::move(id)) {}

    bool in_bounds(int r, int c) const { return r >= 0 && c >= 0 && r < height && c < width; }
    bool at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c] != 0; }
    void set(int r, int c, bool v) { pixels[static_cast<std::size_t>(r) * width + c] = v ? 1 : 0; }
    std::size_t size() const { return pixels.size(); }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// 8-bit grayscale raster, used for heatmaps and synthetic mask export.
struct GrayImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, 0) {}

    std::uint8_t& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
    std::uint8_t at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Quadrant index 2*[row >= H/2] + [col >= W/2]: 0 top-left, 1 top-right,
// 2 bottom-left, 3 bottom-right. Coordinates on the midline go to the >= side.
int quadrant_of(double row, double col, int height, int width);

/// Parses a P5 or P2 PGM payload. `min_side` guards against degenerate inputs.
BinaryMask decode_pgm_mask(std::string_view bytes, int threshold, std::string source_id,
                           int min_side = kMinMaskSide);
GrayImage decode_pgm(std::string_view bytes);

BinaryMask load_mask(const std::filesystem::path& path, int threshold = kDefaultThreshold,
                     int min_side = kMinMaskSide);

std::string encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage to_gray(const BinaryMask& mask);

struct MaskStats {
    std::size_t vessel_count = 0;
    double vessel_fraction = 0.0;
    std::array<std::size_t, 4> quadrant_count{};
    std::array<double, 4> quadrant_fraction{};
};

MaskStats mask_stats(const BinaryMask& mask);

}  // namespace octagraph
