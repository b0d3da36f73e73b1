#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "pqeval/connected_components.hpp"
#include "pqeval/label_map.hpp"

namespace pqeval {

enum class MetricKind { iou, dsc, assd };

inline bool is_similarity(MetricKind k) { return k != MetricKind::assd; }

/// Voxel-count statistics for one (prediction, reference) instance pair.
struct InstancePairStats {
    label_t pred_label = 0;
    label_t ref_label = 0;
    std::uint64_t intersection = 0;
    std::uint64_t pred_volume = 0;
    std::uint64_t ref_volume = 0;
};

/// Sparse joint histogram of two instance maps: one entry per co-occurring
/// positive label pair, plus exact volumes for every instance. All overlap
/// metrics and both matchers read from this table instead of re-scanning
/// voxel data per pair.
struct OverlapTable {
    std::vector<InstancePairStats> entries;  // sorted by (pred_label, ref_label)
    std::map<label_t, std::uint64_t> pred_volumes;
    std::map<label_t, std::uint64_t> ref_volumes;

    const InstancePairStats* find(label_t pred, label_t ref) const {
        auto it = std::lower_bound(
            entries.begin(), entries.end(), std::make_pair(pred, ref),
            [](const InstancePairStats& e, const std::pair<label_t, label_t>& key) {
                return std::make_pair(e.pred_label, e.ref_label) < key;
            });
        if (it != entries.end() && it->pred_label == pred && it->ref_label == ref)
            return &*it;
        return nullptr;
    }
};

inline OverlapTable build_overlap_table(const LabelMap& pred, const LabelMap& ref) {
    require_same_grid(pred, ref, "build_overlap_table");
    OverlapTable table;

    label_t max_label = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        max_label = std::max({max_label, pred[i], ref[i]});

    auto add_entry = [&](label_t p, label_t r, std::uint64_t n) {
        table.entries.push_back({p, r, n, 0, 0});
    };

    if (max_label < (1ull << 32)) {
        // Common case: labels fit 32 bits, pack the pair into one hash key.
        std::unordered_map<std::uint64_t, std::uint64_t> inter;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const label_t p = pred[i], r = ref[i];
            if (p) ++table.pred_volumes[p];
            if (r) ++table.ref_volumes[r];
            if (p && r) ++inter[(p << 32) | r];
        }
        table.entries.reserve(inter.size());
        for (const auto& [key, n] : inter)
            add_entry(key >> 32, key & 0xFFFFFFFFull, n);
    } else {
        std::map<std::pair<label_t, label_t>, std::uint64_t> inter;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const label_t p = pred[i], r = ref[i];
            if (p) ++table.pred_volumes[p];
            if (r) ++table.ref_volumes[r];
            if (p && r) ++inter[{p, r}];
        }
        for (const auto& [key, n] : inter) add_entry(key.first, key.second, n);
    }

    for (auto& e : table.entries) {
        e.pred_volume = table.pred_volumes.at(e.pred_label);
        e.ref_volume = table.ref_volumes.at(e.ref_label);
    }
    std::sort(table.entries.begin(), table.entries.end(),
              [](const InstancePairStats& a, const InstancePairStats& b) {
                  return std::make_pair(a.pred_label, a.ref_label) <
                         std::make_pair(b.pred_label, b.ref_label);
              });
    return table;
}

inline double iou(const InstancePairStats& s) {
    const std::uint64_t uni = s.pred_volume + s.ref_volume - s.intersection;
    if (uni == 0)
        throw std::invalid_argument("iou: both volumes are zero");
    return static_cast<double>(s.intersection) / static_cast<double>(uni);
}

inline double dsc(const InstancePairStats& s) {
    const std::uint64_t total = s.pred_volume + s.ref_volume;
    if (total == 0)
        throw std::invalid_argument("dsc: both volumes are zero");
    return 2.0 * static_cast<double>(s.intersection) / static_cast<double>(total);
}

/// Overlap score of a pair under the selected matching metric.
inline double pair_score(const InstancePairStats& s, MetricKind kind) {
    switch (kind) {
        case MetricKind::iou: return iou(s);
        case MetricKind::dsc: return dsc(s);
        default:
            throw std::invalid_argument("pair_score: metric must be IOU or DSC");
    }
}

/// Row-major indices of foreground voxels with at least one background or
/// out-of-bounds neighbor under `conn`.
inline std::vector<std::size_t> surface_voxels(const LabelMap& mask,
                                               Connectivity conn) {
    if (!connectivity_valid(conn, mask.dims()))
        throw std::invalid_argument("surface_voxels: invalid connectivity");
    const auto offsets = detail::neighbor_offsets(conn);
    const auto s3 = mask.shape3();
    const auto st = mask.strides3();
    const std::ptrdiff_t Z = static_cast<std::ptrdiff_t>(s3[0]);
    const std::ptrdiff_t Y = static_cast<std::ptrdiff_t>(s3[1]);
    const std::ptrdiff_t X = static_cast<std::ptrdiff_t>(s3[2]);

    std::vector<std::size_t> surface;
    std::size_t i = 0;
    for (std::ptrdiff_t z = 0; z < Z; ++z)
        for (std::ptrdiff_t y = 0; y < Y; ++y)
            for (std::ptrdiff_t x = 0; x < X; ++x, ++i) {
                if (mask[i] == 0) continue;
                for (const auto& o : offsets) {
                    const std::ptrdiff_t nz = z + o[0];
                    const std::ptrdiff_t ny = y + o[1];
                    const std::ptrdiff_t nx = x + o[2];
                    if (nz < 0 || nz >= Z || ny < 0 || ny >= Y || nx < 0 || nx >= X ||
                        mask[static_cast<std::size_t>(nz) * st[0] +
                             static_cast<std::size_t>(ny) * st[1] +
                             static_cast<std::size_t>(nx)] == 0) {
                        surface.push_back(i);
                        break;
                    }
                }
            }
    return surface;
}

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared-distance transform (Felzenszwalb & Huttenlocher lower
// envelope of parabolas) with sample positions x_i = i*step. +inf inputs
// carry no parabola; all-inf lines stay inf.
inline void dt1d(std::vector<double>& f, std::size_t n, double step,
                 std::vector<int>& v, std::vector<double>& z,
                 std::vector<double>& d) {
    int k = -1;
    for (std::size_t q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        const double xq = static_cast<double>(q) * step;
        double s = 0.0;
        while (k >= 0) {
            const double xp = static_cast<double>(v[k]) * step;
            s = ((f[q] + xq * xq) - (f[v[k]] + xp * xp)) / (2.0 * (xq - xp));
            if (s <= z[k]) --k;
            else break;
        }
        ++k;
        v[k] = static_cast<int>(q);
        z[k] = k == 0 ? -kInf : s;
        z[k + 1] = kInf;
    }
    if (k < 0) {
        std::fill(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(n), kInf);
        return;
    }
    int j = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) * step;
        while (z[j + 1] < x) ++j;
        const double dx = x - static_cast<double>(v[j]) * step;
        d[i] = f[v[j]] + dx * dx;
    }
}

// Exact squared Euclidean distance (spacing-scaled) from every grid voxel
// to the nearest seed, by separable 1D passes.
inline std::vector<double> squared_distance_grid(
    const std::array<std::size_t, 3>& shape3, const std::array<double, 3>& spacing3,
    const std::vector<std::size_t>& seeds) {
    const std::size_t n = shape3[0] * shape3[1] * shape3[2];
    std::vector<double> dist(n, kInf);
    for (std::size_t s : seeds) dist[s] = 0.0;

    const std::array<std::size_t, 3> strides{shape3[1] * shape3[2], shape3[2], 1};
    const std::size_t max_extent = std::max({shape3[0], shape3[1], shape3[2]});
    std::vector<double> f(max_extent), d(max_extent), z(max_extent + 1);
    std::vector<int> v(max_extent);

    for (int axis = 2; axis >= 0; --axis) {
        const std::size_t extent = shape3[axis];
        if (extent <= 1) continue;
        const std::size_t stride = strides[axis];
        const int a1 = axis == 0 ? 1 : 0;
        const int a2 = axis == 2 ? 1 : 2;
        for (std::size_t i1 = 0; i1 < shape3[a1]; ++i1)
            for (std::size_t i2 = 0; i2 < shape3[a2]; ++i2) {
                const std::size_t base = i1 * strides[a1] + i2 * strides[a2];
                for (std::size_t i = 0; i < extent; ++i) f[i] = dist[base + i * stride];
                dt1d(f, extent, spacing3[axis], v, z, d);
                for (std::size_t i = 0; i < extent; ++i) dist[base + i * stride] = d[i];
            }
    }
    return dist;
}

inline bool spacing_ok(const std::vector<double>& spacing, int dims) {
    if (spacing.size() != static_cast<std::size_t>(dims)) return false;
    for (double s : spacing)
        if (!(s > 0.0)) return false;
    return true;
}

}  // namespace detail

/// Average symmetric surface distance between two foreground masks, pooled
/// over both surface sets:
///   (sum_a min_b d(a,b) + sum_b min_a d(b,a)) / (|S_A| + |S_B|)
/// with spacing-scaled Euclidean distances between voxel centers. Exactly
/// one empty mask gives +inf, both empty gives NaN; callers map those
/// through their edge-case policy.
inline double assd(const LabelMap& a, const LabelMap& b, Connectivity surface_conn,
                   const std::vector<double>& spacing) {
    require_same_grid(a, b, "assd");
    if (!detail::spacing_ok(spacing, a.dims()))
        throw std::invalid_argument("assd: invalid spacing");

    const bool a_fg = a.any_foreground();
    const bool b_fg = b.any_foreground();
    if (!a_fg && !b_fg) return std::numeric_limits<double>::quiet_NaN();
    if (!a_fg || !b_fg) return detail::kInf;

    // Restrict work to the joint bounding box: all foreground (hence every
    // surface voxel and every nearest neighbor) lies inside it.
    const BoundingBox box = joint_bounding_box(a, b);
    LabelMap ca = crop(a, box);
    LabelMap cb = crop(b, box);
    ca.set_spacing(spacing);
    cb.set_spacing(spacing);

    const auto sa = surface_voxels(ca, surface_conn);
    const auto sb = surface_voxels(cb, surface_conn);
    const auto s3 = ca.shape3();
    const auto sp3 = ca.spacing3();

    const auto dist_b = detail::squared_distance_grid(s3, sp3, sb);
    const auto dist_a = detail::squared_distance_grid(s3, sp3, sa);

    double total = 0.0;
    for (std::size_t i : sa) total += std::sqrt(dist_b[i]);
    for (std::size_t i : sb) total += std::sqrt(dist_a[i]);
    return total / static_cast<double>(sa.size() + sb.size());
}

/// ASSD with the standard face-adjacency surface definition and the first
/// map's spacing.
inline double assd(const LabelMap& a, const LabelMap& b) {
    return assd(a, b, face_connectivity(a.dims()), a.spacing());
}

/// Global volumetric Dice over the binarized whole maps, ignoring instance
/// structure. Both-empty is undefined (NaN) until a policy says otherwise.
inline double global_dsc(const LabelMap& pred, const LabelMap& ref) {
    require_same_grid(pred, ref, "global_dsc");
    std::uint64_t pv = 0, rv = 0, inter = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] > 0;
        const bool r = ref[i] > 0;
        pv += p;
        rv += r;
        inter += p && r;
    }
    if (pv + rv == 0) return std::numeric_limits<double>::quiet_NaN();
    return 2.0 * static_cast<double>(inter) / static_cast<double>(pv + rv);
}

/// Metric dispatch for one mask pair. IOU/DSC take the fast path through
/// `stats` when provided; ASSD always walks the voxel data.
inline double pair_metric(MetricKind kind, const LabelMap& pred_mask,
                          const LabelMap& ref_mask,
                          const InstancePairStats* stats, Connectivity surface_conn,
                          const std::vector<double>& spacing) {
    if (kind == MetricKind::assd)
        return assd(pred_mask, ref_mask, surface_conn, spacing);
    InstancePairStats local;
    if (!stats) {
        require_same_grid(pred_mask, ref_mask, "pair_metric");
        for (std::size_t i = 0; i < pred_mask.size(); ++i) {
            const bool p = pred_mask[i] > 0;
            const bool r = ref_mask[i] > 0;
            local.pred_volume += p;
            local.ref_volume += r;
            local.intersection += p && r;
        }
        stats = &local;
    }
    return pair_score(*stats, kind);
}

}  // namespace pqeval
