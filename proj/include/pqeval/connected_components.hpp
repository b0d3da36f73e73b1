#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pqeval/label_map.hpp"

namespace pqeval {

/// Neighborhood used for component growth: 4/8 in 2D, 6/18/26 in 3D.
enum class Connectivity : int {
    c4 = 4,
    c8 = 8,
    c6 = 6,
    c18 = 18,
    c26 = 26,
};

inline bool connectivity_valid(Connectivity c, int dims) {
    if (dims == 2) return c == Connectivity::c4 || c == Connectivity::c8;
    if (dims == 3)
        return c == Connectivity::c6 || c == Connectivity::c18 ||
               c == Connectivity::c26;
    return false;
}

/// Widest standard neighborhood for the dimensionality (8 / 26).
inline Connectivity default_connectivity(int dims) {
    return dims == 2 ? Connectivity::c8 : Connectivity::c26;
}

/// Face-adjacency neighborhood (4 / 6); used for surface extraction.
inline Connectivity face_connectivity(int dims) {
    return dims == 2 ? Connectivity::c4 : Connectivity::c6;
}

enum class CcaStrategy {
    two_pass_union_find,
    flood_fill,
    automatic,
};

/// Strategy picked when the caller asks for `automatic`: flood fill for 2D
/// inputs, two-pass union-find for 3D, matching which backend benchmarks
/// faster per dimensionality.
inline CcaStrategy resolve_auto_strategy(int dims) {
    if (dims == 2) return CcaStrategy::flood_fill;
    if (dims == 3) return CcaStrategy::two_pass_union_find;
    throw std::invalid_argument("resolve_auto_strategy: dims must be 2 or 3");
}

/// Concrete strategies pass through unchanged.
inline CcaStrategy resolve_strategy(CcaStrategy s, int dims) {
    return s == CcaStrategy::automatic ? resolve_auto_strategy(dims) : s;
}

namespace detail {

// Offsets as (dz, dy, dx) over the normalized 3D view. 2D connectivities
// keep dz == 0.
inline std::vector<std::array<int, 3>> neighbor_offsets(Connectivity c) {
    std::vector<std::array<int, 3>> out;
    const int conn = static_cast<int>(c);
    const bool planar = conn == 4 || conn == 8;
    for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (dz == 0 && dy == 0 && dx == 0) continue;
                if (planar && dz != 0) continue;
                const int manhattan = std::abs(dz) + std::abs(dy) + std::abs(dx);
                bool keep = false;
                switch (conn) {
                    case 4: keep = manhattan == 1; break;
                    case 8: keep = true; break;
                    case 6: keep = manhattan == 1; break;
                    case 18: keep = manhattan <= 2; break;
                    case 26: keep = true; break;
                }
                if (keep) out.push_back({dz, dy, dx});
            }
    return out;
}

// Offsets that precede the current voxel in row-major order; the raster
// scan of the two-pass labeling only ever looks backwards.
inline std::vector<std::array<int, 3>> previous_offsets(Connectivity c) {
    std::vector<std::array<int, 3>> out;
    for (const auto& o : neighbor_offsets(c)) {
        if (o[0] < 0 || (o[0] == 0 && (o[1] < 0 || (o[1] == 0 && o[2] < 0))))
            out.push_back(o);
    }
    return out;
}

inline void check_cca_input(const LabelMap& map, Connectivity conn) {
    if (!connectivity_valid(conn, map.dims()))
        throw std::invalid_argument(
            "connected_components: connectivity " +
            std::to_string(static_cast<int>(conn)) + " is invalid for " +
            std::to_string(map.dims()) + "D input");
    for (std::size_t i = 0; i < map.size(); ++i)
        if (map[i] > 1)
            throw std::invalid_argument(
                "connected_components: input must be binary (labels 0/1)");
}

struct UnionFind {
    std::vector<std::uint32_t> parent{0};  // parent[0] unused; labels 1-based
    std::vector<std::uint8_t> rank{0};

    std::uint32_t make() {
        parent.push_back(static_cast<std::uint32_t>(parent.size()));
        rank.push_back(0);
        return static_cast<std::uint32_t>(parent.size() - 1);
    }

    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];  // path halving
            x = parent[x];
        }
        return x;
    }

    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank[a] < rank[b]) std::swap(a, b);
        parent[b] = a;
        if (rank[a] == rank[b]) ++rank[a];
    }
};

}  // namespace detail

struct ComponentLabeling {
    LabelMap map;       // labels 0 (background) and 1..count
    std::size_t count;  // number of components
};

/// Label connected components of a binary map. Components are numbered by
/// the row-major index of their first voxel, so both strategies produce
/// bit-identical output and results are reproducible.
inline ComponentLabeling connected_components(
    const LabelMap& map, Connectivity conn,
    CcaStrategy strategy = CcaStrategy::automatic) {
    detail::check_cca_input(map, conn);
    strategy = resolve_strategy(strategy, map.dims());

    const auto s3 = map.shape3();
    const auto st = map.strides3();
    const std::ptrdiff_t Z = static_cast<std::ptrdiff_t>(s3[0]);
    const std::ptrdiff_t Y = static_cast<std::ptrdiff_t>(s3[1]);
    const std::ptrdiff_t X = static_cast<std::ptrdiff_t>(s3[2]);

    LabelMap out(map.shape(), map.spacing());
    std::size_t count = 0;

    if (strategy == CcaStrategy::flood_fill) {
        const auto offsets = detail::neighbor_offsets(conn);
        std::vector<std::size_t> stack;
        std::size_t i = 0;
        for (std::ptrdiff_t z = 0; z < Z; ++z)
            for (std::ptrdiff_t y = 0; y < Y; ++y)
                for (std::ptrdiff_t x = 0; x < X; ++x, ++i) {
                    if (map[i] == 0 || out[i] != 0) continue;
                    const label_t lab = static_cast<label_t>(++count);
                    out[i] = lab;
                    stack.push_back(i);
                    while (!stack.empty()) {
                        const std::size_t j = stack.back();
                        stack.pop_back();
                        const std::ptrdiff_t jz = static_cast<std::ptrdiff_t>(j / st[0]);
                        const std::ptrdiff_t jy =
                            static_cast<std::ptrdiff_t>((j % st[0]) / st[1]);
                        const std::ptrdiff_t jx = static_cast<std::ptrdiff_t>(j % st[1]);
                        for (const auto& o : offsets) {
                            const std::ptrdiff_t nz = jz + o[0];
                            const std::ptrdiff_t ny = jy + o[1];
                            const std::ptrdiff_t nx = jx + o[2];
                            if (nz < 0 || nz >= Z || ny < 0 || ny >= Y || nx < 0 ||
                                nx >= X)
                                continue;
                            const std::size_t n = static_cast<std::size_t>(nz) * st[0] +
                                                  static_cast<std::size_t>(ny) * st[1] +
                                                  static_cast<std::size_t>(nx);
                            if (map[n] != 0 && out[n] == 0) {
                                out[n] = lab;
                                stack.push_back(n);
                            }
                        }
                    }
                }
        return {std::move(out), count};
    }

    // Two-pass union-find. Pass 1 assigns provisional labels from the
    // already-scanned neighbors and records equivalences; pass 2 resolves
    // roots and renumbers them compactly in order of first appearance,
    // which is exactly the flood-fill numbering.
    const auto prev = detail::previous_offsets(conn);
    std::vector<std::uint32_t> prov(map.size(), 0);
    detail::UnionFind uf;

    std::size_t i = 0;
    for (std::ptrdiff_t z = 0; z < Z; ++z)
        for (std::ptrdiff_t y = 0; y < Y; ++y)
            for (std::ptrdiff_t x = 0; x < X; ++x, ++i) {
                if (map[i] == 0) continue;
                std::uint32_t first = 0;
                for (const auto& o : prev) {
                    const std::ptrdiff_t nz = z + o[0];
                    const std::ptrdiff_t ny = y + o[1];
                    const std::ptrdiff_t nx = x + o[2];
                    if (nz < 0 || ny < 0 || ny >= Y || nx < 0 || nx >= X) continue;
                    const std::size_t n = static_cast<std::size_t>(nz) * st[0] +
                                          static_cast<std::size_t>(ny) * st[1] +
                                          static_cast<std::size_t>(nx);
                    const std::uint32_t lab = prov[n];
                    if (lab == 0) continue;
                    if (first == 0) first = lab;
                    else uf.unite(first, lab);
                }
                prov[i] = first != 0 ? first : uf.make();
            }

    std::vector<label_t> canon(uf.parent.size(), 0);
    for (std::size_t j = 0; j < map.size(); ++j) {
        if (prov[j] == 0) continue;
        const std::uint32_t root = uf.find(prov[j]);
        if (canon[root] == 0) canon[root] = static_cast<label_t>(++count);
        out[j] = canon[root];
    }
    return {std::move(out), count};
}

/// CCA over the binarized prediction and reference, independently. The
/// first stage of the semantic-input pipeline.
inline std::pair<ComponentLabeling, ComponentLabeling> approximate_instances(
    const LabelMap& pred, const LabelMap& ref, Connectivity conn,
    CcaStrategy strategy = CcaStrategy::automatic) {
    require_same_grid(pred, ref, "approximate_instances");
    return {connected_components(binarize(pred), conn, strategy),
            connected_components(binarize(ref), conn, strategy)};
}

}  // namespace pqeval
