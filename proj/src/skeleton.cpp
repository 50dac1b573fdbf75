#include "octagraph/skeleton.hpp"

#include "octagraph/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <deque>
#include <limits>

namespace octagraph {

namespace {

// Neighbour order P2..P9: N, NE, E, SE, S, SW, W, NW.
constexpr std::array<int, 8> kDr = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr std::array<int, 8> kDc = {0, 1, 1, 1, 0, -1, -1, -1};

std::size_t idx(int r, int c, int w) { return static_cast<std::size_t>(r) * w + c; }

unsigned ring_code(const std::vector<std::uint8_t>& g, int h, int w, int r, int c) {
    unsigned code = 0;
    for (int k = 0; k < 8; ++k) {
        const int rr = r + kDr[k];
        const int cc = c + kDc[k];
        if (rr >= 0 && cc >= 0 && rr < h && cc < w && g[idx(rr, cc, w)]) code |= 1u << k;
    }
    return code;
}

// A pixel is simple when removing it changes neither the number of 8-connected
// foreground components nor the number of 4-connected background components in
// its 3x3 neighbourhood.
std::array<bool, 256> build_simple_table() {
    std::array<bool, 256> table{};
    for (unsigned code = 0; code < 256; ++code) {
        auto set = [&](int k) { return ((code >> k) & 1u) != 0; };
        auto comps = [&](bool foreground, bool four) {
            std::array<int, 8> label;
            label.fill(-1);
            int n = 0;
            for (int s = 0; s < 8; ++s) {
                if (set(s) != foreground || label[s] >= 0) continue;
                std::deque<int> queue{s};
                label[s] = n;
                while (!queue.empty()) {
                    const int a = queue.front();
                    queue.pop_front();
                    for (int b = 0; b < 8; ++b) {
                        if (label[b] >= 0 || set(b) != foreground) continue;
                        const int dr = std::abs(kDr[a] - kDr[b]);
                        const int dc = std::abs(kDc[a] - kDc[b]);
                        const bool adjacent = four ? (dr + dc == 1) : (std::max(dr, dc) == 1);
                        if (adjacent) {
                            label[b] = n;
                            queue.push_back(b);
                        }
                    }
                }
                ++n;
            }
            return std::pair{n, label};
        };
        const int fg = comps(true, false).first;
        const auto bg_label = comps(false, true).second;
        std::array<bool, 8> touching{};
        for (int s : {0, 2, 4, 6}) {
            if (!set(s)) touching[bg_label[s]] = true;
        }
        const int bg_touching = static_cast<int>(std::count(touching.begin(), touching.end(), true));
        table[code] = fg == 1 && bg_touching == 1;
    }
    return table;
}

const std::array<bool, 256>& simple_table() {
    static const std::array<bool, 256> table = build_simple_table();
    return table;
}

int popcount8(unsigned code) { return std::popcount(code & 0xffu); }

void reconnect_components(const BinaryMask& mask, std::vector<std::uint8_t>& skel) {
    const int h = mask.height;
    const int w = mask.width;
    std::vector<int> comp;
    const int n = label_components8(mask, comp);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < comp.size(); ++i) {
        if (comp[i] >= 0) members[comp[i]].push_back(i);
    }
    const std::vector<double> dt = distance_transform(mask);

    for (int k = 0; k < n; ++k) {
        const auto& pix = members[k];
        std::size_t first_skel = pix.size();
        for (std::size_t j = 0; j < pix.size(); ++j) {
            if (skel[pix[j]]) {
                first_skel = j;
                break;
            }
        }
        if (first_skel == pix.size()) {
            // Thinning erased the whole component (e.g. a 2x2 block); keep its deepest pixel.
            std::size_t best = pix.front();
            for (std::size_t p : pix) {
                if (dt[p] > dt[best]) best = p;
            }
            skel[best] = 1;
            continue;
        }
        while (true) {
            // Grow the skeleton piece containing the first skeletal pixel.
            std::vector<std::uint8_t> in_piece(skel.size(), 0);
            std::deque<std::size_t> queue{pix[first_skel]};
            in_piece[pix[first_skel]] = 1;
            std::size_t piece_size = 0;
            while (!queue.empty()) {
                const std::size_t p = queue.front();
                queue.pop_front();
                ++piece_size;
                const int r = static_cast<int>(p / w);
                const int c = static_cast<int>(p % w);
                for (int d = 0; d < 8; ++d) {
                    const int rr = r + kDr[d];
                    const int cc = c + kDc[d];
                    if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
                    const std::size_t q = idx(rr, cc, w);
                    if (skel[q] && !in_piece[q]) {
                        in_piece[q] = 1;
                        queue.push_back(q);
                    }
                }
            }
            std::size_t skel_total = 0;
            for (std::size_t p : pix) skel_total += skel[p];
            if (piece_size == skel_total) break;

            // Shortest 8-connected path through the vessel to another piece.
            std::vector<long> parent(skel.size(), -2);
            for (std::size_t p : pix) {
                if (in_piece[p]) {
                    parent[p] = -1;
                    queue.push_back(p);
                }
            }
            long hit = -1;
            while (!queue.empty() && hit < 0) {
                const std::size_t p = queue.front();
                queue.pop_front();
                const int r = static_cast<int>(p / w);
                const int c = static_cast<int>(p % w);
                for (int d = 0; d < 8; ++d) {
                    const int rr = r + kDr[d];
                    const int cc = c + kDc[d];
                    if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
                    const std::size_t q = idx(rr, cc, w);
                    if (!mask.pixels[q] || parent[q] != -2) continue;
                    parent[q] = static_cast<long>(p);
                    if (skel[q]) {
                        hit = static_cast<long>(q);
                        break;
                    }
                    queue.push_back(q);
                }
            }
            queue.clear();
            for (long p = hit; p >= 0 && parent[p] != -1; p = parent[p]) skel[p] = 1;
        }
    }
}

void prune_redundant(std::vector<std::uint8_t>& skel, int h, int w) {
    const auto& simple = simple_table();
    bool changed = true;
    while (changed) {
        changed = false;
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                if (!skel[idx(r, c, w)]) continue;
                const unsigned code = ring_code(skel, h, w, r, c);
                if (popcount8(code) >= 2 && simple[code]) {
                    skel[idx(r, c, w)] = 0;
                    changed = true;
                }
            }
        }
    }
}

}  // namespace

int Skeleton::neighbor_count(int r, int c) const {
    return popcount8(ring_code(grid, height, width, r, c));
}

int label_components8(const BinaryMask& mask, std::vector<int>& labels) {
    const int h = mask.height;
    const int w = mask.width;
    labels.assign(mask.pixels.size(), -1);
    int n = 0;
    std::deque<std::size_t> queue;
    for (std::size_t s = 0; s < mask.pixels.size(); ++s) {
        if (!mask.pixels[s] || labels[s] >= 0) continue;
        labels[s] = n;
        queue.push_back(s);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            const int r = static_cast<int>(p / w);
            const int c = static_cast<int>(p % w);
            for (int d = 0; d < 8; ++d) {
                const int rr = r + kDr[d];
                const int cc = c + kDc[d];
                if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
                const std::size_t q = idx(rr, cc, w);
                if (mask.pixels[q] && labels[q] < 0) {
                    labels[q] = n;
                    queue.push_back(q);
                }
            }
        }
        ++n;
    }
    return n;
}

BinaryMask zhang_suen_thin(const BinaryMask& mask) {
    BinaryMask out = mask;
    const int h = mask.height;
    const int w = mask.width;
    std::vector<std::size_t> doomed;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            doomed.clear();
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    if (!out.pixels[idx(r, c, w)]) continue;
                    const unsigned code = ring_code(out.pixels, h, w, r, c);
                    const int b = popcount8(code);
                    if (b < 2 || b > 6) continue;
                    int a = 0;
                    for (int k = 0; k < 8; ++k) {
                        if (!((code >> k) & 1u) && ((code >> ((k + 1) % 8)) & 1u)) ++a;
                    }
                    if (a != 1) continue;
                    const bool p2 = code & 1u, p4 = code & 4u, p6 = code & 16u, p8 = code & 64u;
                    const bool keep = pass == 0 ? ((p2 && p4 && p6) || (p4 && p6 && p8))
                                                : ((p2 && p4 && p8) || (p2 && p6 && p8));
                    if (!keep) doomed.push_back(idx(r, c, w));
                }
            }
            for (std::size_t p : doomed) out.pixels[p] = 0;
            if (!doomed.empty()) changed = true;
        }
    }
    return out;
}

Skeleton skeletonize(const BinaryMask& mask) {
    if (std::none_of(mask.pixels.begin(), mask.pixels.end(), [](std::uint8_t v) { return v != 0; })) {
        throw Error(ErrorCode::EmptyMask, "mask '" + mask.source_id + "' has no vessel pixels");
    }
    const int h = mask.height;
    const int w = mask.width;
    std::vector<std::uint8_t> skel = zhang_suen_thin(mask).pixels;
    reconnect_components(mask, skel);
    prune_redundant(skel, h, w);

    Skeleton s;
    s.height = h;
    s.width = w;
    s.grid = std::move(skel);
    s.junction.assign(s.grid.size(), -1);

    std::vector<std::uint8_t> is_branch(s.grid.size(), 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!s.grid[idx(r, c, w)]) continue;
            s.skeletal_pixels.push_back({r, c});
            const int n = s.neighbor_count(r, c);
            if (n <= 1) s.end_points.push_back({r, c});
            if (n >= 3) is_branch[idx(r, c, w)] = 1;
        }
    }

    int clusters = 0;
    for (const Pixel& start : s.skeletal_pixels) {
        const std::size_t si = idx(start.row, start.col, w);
        if (!is_branch[si] || s.junction[si] >= 0) continue;
        Pixel rep = start;
        int rep_count = s.neighbor_count(start.row, start.col);
        std::deque<Pixel> queue{start};
        s.junction[si] = clusters;
        while (!queue.empty()) {
            const Pixel p = queue.front();
            queue.pop_front();
            const int n = s.neighbor_count(p.row, p.col);
            if (n > rep_count || (n == rep_count && p < rep)) {
                rep = p;
                rep_count = n;
            }
            for (int d = 0; d < 8; ++d) {
                const int rr = p.row + kDr[d];
                const int cc = p.col + kDc[d];
                if (!s.in_bounds(rr, cc)) continue;
                const std::size_t q = idx(rr, cc, w);
                if (is_branch[q] && s.junction[q] < 0) {
                    s.junction[q] = clusters;
                    queue.push_back({rr, cc});
                }
            }
        }
        s.branch_points.push_back(rep);
        ++clusters;
    }
    return s;
}

namespace {

// 1-D squared distance transform of a sampled function (lower envelope of parabolas).
constexpr double kFar = 1e20;

void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    d.assign(n, 0.0);
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int k = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    auto intersect = [&](int q, int p) {
        return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
    };
    for (int q = 1; q < n; ++q) {
        double s = intersect(q, v[k]);
        while (s <= z[k]) {
            --k;
            s = intersect(q, v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double diff = q - v[k];
        d[q] = diff * diff + f[v[k]];
    }
}

}  // namespace

std::vector<double> distance_transform(const BinaryMask& mask) {
    const int h = mask.height + 2;
    const int w = mask.width + 2;
    std::vector<double> grid(static_cast<std::size_t>(h) * w, 0.0);
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (mask.at(r, c)) grid[idx(r + 1, c + 1, w)] = kFar;
        }
    }
    std::vector<double> f, d, z;
    std::vector<int> v;
    for (int c = 0; c < w; ++c) {
        f.resize(h);
        for (int r = 0; r < h; ++r) f[r] = grid[idx(r, c, w)];
        edt_1d(f, d, v, z);
        for (int r = 0; r < h; ++r) grid[idx(r, c, w)] = d[r];
    }
    for (int r = 0; r < h; ++r) {
        f.assign(grid.begin() + static_cast<long>(idx(r, 0, w)), grid.begin() + static_cast<long>(idx(r, w, w)));
        edt_1d(f, d, v, z);
        for (int c = 0; c < w; ++c) grid[idx(r, c, w)] = d[c];
    }
    std::vector<double> out(mask.pixels.size(), 0.0);
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            out[idx(r, c, mask.width)] = std::sqrt(grid[idx(r + 1, c + 1, w)]);
        }
    }
    return out;
}

}  // namespace octagraph
