#include "octagraph/mask.hpp"

#include "octagraph/error.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace octagraph {

int quadrant_of(double row, double col, int height, int width) {
    const int bottom = row >= height / 2.0 ? 1 : 0;
    const int right = col >= width / 2.0 ? 1 : 0;
    return 2 * bottom + right;
}

namespace {

class PgmReader {
public:
    explicit PgmReader(std::string_view bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const char ch = bytes_[pos_];
            if (ch == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(ch))) {
                ++pos_;
            } else {
                return;
            }
        }
    }

    long read_uint(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000'000L) throw Error(ErrorCode::MalformedInput, std::string(what) + " too large");
            ++pos_;
        }
        if (pos_ == start) throw Error(ErrorCode::MalformedInput, std::string("expected ") + what);
        return value;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }
    std::string_view rest() const { return bytes_.substr(std::min(pos_, bytes_.size())); }
    bool at_end() const { return pos_ >= bytes_.size(); }
    char peek() const { return bytes_[pos_]; }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

GrayImage decode_pgm(std::string_view bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2')) {
        throw Error(ErrorCode::MalformedInput, "bad PGM magic");
    }
    const bool binary = bytes[1] == '5';
    PgmReader reader(bytes);
    reader.advance(2);
    const long width = reader.read_uint("width");
    const long height = reader.read_uint("height");
    const long maxval = reader.read_uint("maxval");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::MalformedInput, "zero dimension");
    if (maxval <= 0 || maxval > 255) {
        throw Error(ErrorCode::MalformedInput, "maxval must be in 1..255, got " + std::to_string(maxval));
    }

    GrayImage image(static_cast<int>(height), static_cast<int>(width));
    const std::size_t count = image.pixels.size();
    if (binary) {
        // Exactly one whitespace byte separates the header from the raster.
        if (reader.at_end() || !std::isspace(static_cast<unsigned char>(reader.peek()))) {
            throw Error(ErrorCode::MalformedInput, "missing header terminator");
        }
        reader.advance(1);
        const std::string_view payload = reader.rest();
        if (payload.size() < count) {
            throw Error(ErrorCode::MalformedInput, "truncated payload: expected " + std::to_string(count) +
                                                       " bytes, got " + std::to_string(payload.size()));
        }
        for (std::size_t i = 0; i < count; ++i) {
            const auto v = static_cast<unsigned char>(payload[i]);
            if (v > maxval) throw Error(ErrorCode::MalformedInput, "sample exceeds maxval");
            image.pixels[i] = v;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            long v = 0;
            try {
                v = reader.read_uint("sample");
            } catch (const Error&) {
                throw Error(ErrorCode::MalformedInput, "truncated ASCII payload at sample " + std::to_string(i));
            }
            if (v > maxval) throw Error(ErrorCode::MalformedInput, "sample exceeds maxval");
            image.pixels[i] = static_cast<std::uint8_t>(v);
        }
    }
    return image;
}

BinaryMask decode_pgm_mask(std::string_view bytes, int threshold, std::string source_id, int min_side) {
    if (threshold < 0 || threshold > 255) throw Error(ErrorCode::InvalidArgument, "threshold must be 0..255");
    const GrayImage gray = decode_pgm(bytes);
    if (gray.height < min_side || gray.width < min_side) {
        throw Error(ErrorCode::TooSmall, std::to_string(gray.height) + "x" + std::to_string(gray.width) +
                                             " is below the minimum side " + std::to_string(min_side));
    }
    BinaryMask mask(gray.height, gray.width, std::move(source_id));
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
        mask.pixels[i] = gray.pixels[i] >= threshold ? 1 : 0;
    }
    return mask;
}

BinaryMask load_mask(const std::filesystem::path& path, int threshold, int min_side) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return decode_pgm_mask(buf.str(), threshold, path.stem().string(), min_side);
}

std::string encode_pgm(const GrayImage& image) {
    std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
    return out;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    const std::string bytes = encode_pgm(image);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

GrayImage to_gray(const BinaryMask& mask) {
    GrayImage image(mask.height, mask.width);
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) image.pixels[i] = mask.pixels[i] ? 255 : 0;
    return image;
}

MaskStats mask_stats(const BinaryMask& mask) {
    MaskStats stats;
    std::array<std::size_t, 4> area{};
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            const int q = quadrant_of(r, c, mask.height, mask.width);
            ++area[q];
            if (mask.at(r, c)) {
                ++stats.quadrant_count[q];
                ++stats.vessel_count;
            }
        }
    }
    if (!mask.pixels.empty()) {
        stats.vessel_fraction = static_cast<double>(stats.vessel_count) / static_cast<double>(mask.pixels.size());
    }
    for (int q = 0; q < 4; ++q) {
        stats.quadrant_fraction[q] =
            area[q] == 0 ? 0.0 : static_cast<double>(stats.quadrant_count[q]) / static_cast<double>(area[q]);
    }
    return stats;
}

}  // namespace octagraph
