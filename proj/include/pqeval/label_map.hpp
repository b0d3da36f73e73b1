#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace pqeval {

// In-memory label type. Wide on purpose: false-positive relabeling can push
// labels past the range of the on-disk dtype.
using label_t = std::uint64_t;

/// Axis-aligned index box: `lo` inclusive, `hi` exclusive. lo == hi on any
/// axis means the box is empty.
struct BoundingBox {
    std::vector<std::size_t> lo;
    std::vector<std::size_t> hi;

    bool empty() const {
        if (lo.empty()) return true;
        for (std::size_t k = 0; k < lo.size(); ++k)
            if (lo[k] >= hi[k]) return true;
        return false;
    }
};

/// Dense 2D/3D map of non-negative integer labels, row-major (last axis
/// fastest). Label 0 is background. Voxel spacing defaults to isotropic 1.0
/// (plain voxel units unless the caller supplies physical sizes).
class LabelMap {
public:
    LabelMap() = default;

    LabelMap(std::vector<std::size_t> shape, std::vector<double> spacing = {})
        : LabelMap(std::move(shape),
                   std::vector<label_t>(), std::move(spacing), /*zero_fill=*/true) {}

    LabelMap(std::vector<std::size_t> shape, std::vector<label_t> data,
             std::vector<double> spacing = {})
        : LabelMap(std::move(shape), std::move(data), std::move(spacing),
                   /*zero_fill=*/false) {}

    int dims() const { return static_cast<int>(shape_.size()); }
    const std::vector<std::size_t>& shape() const { return shape_; }
    const std::vector<double>& spacing() const { return spacing_; }
    std::size_t size() const { return data_.size(); }

    void set_spacing(std::vector<double> spacing) {
        check_spacing(spacing, shape_.size());
        spacing_ = std::move(spacing);
    }

    label_t operator[](std::size_t i) const { return data_[i]; }
    label_t& operator[](std::size_t i) { return data_[i]; }
    const std::vector<label_t>& data() const { return data_; }
    std::vector<label_t>& data() { return data_; }

    /// Shape normalized to three axes: a 2D map is viewed as [1, h, w].
    /// Lets neighborhood and cropping code run one generic 3D loop.
    std::array<std::size_t, 3> shape3() const {
        if (dims() == 2) return {1, shape_[0], shape_[1]};
        return {shape_[0], shape_[1], shape_[2]};
    }

    std::array<double, 3> spacing3() const {
        if (dims() == 2) return {1.0, spacing_[0], spacing_[1]};
        return {spacing_[0], spacing_[1], spacing_[2]};
    }

    /// Row-major strides for the normalized 3D view.
    std::array<std::size_t, 3> strides3() const {
        const auto s = shape3();
        return {s[1] * s[2], s[2], 1};
    }

    bool any_foreground() const {
        return std::any_of(data_.begin(), data_.end(),
                           [](label_t v) { return v != 0; });
    }

    bool same_grid(const LabelMap& other) const {
        return shape_ == other.shape_;
    }

    friend bool operator==(const LabelMap& a, const LabelMap& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    LabelMap(std::vector<std::size_t> shape, std::vector<label_t> data,
             std::vector<double> spacing, bool zero_fill) {
        if (shape.size() < 2 || shape.size() > 3)
            throw std::invalid_argument("LabelMap: dims must be 2 or 3, got " +
                                        std::to_string(shape.size()));
        std::size_t n = 1;
        for (std::size_t e : shape) {
            if (e == 0)
                throw std::invalid_argument("LabelMap: shape extents must be positive");
            n *= e;
        }
        if (zero_fill) {
            data.assign(n, 0);
        } else if (data.size() != n) {
            throw std::invalid_argument(
                "LabelMap: data length " + std::to_string(data.size()) +
                " does not match shape product " + std::to_string(n));
        }
        if (spacing.empty()) spacing.assign(shape.size(), 1.0);
        check_spacing(spacing, shape.size());
        shape_ = std::move(shape);
        data_ = std::move(data);
        spacing_ = std::move(spacing);
    }

    static void check_spacing(const std::vector<double>& spacing, std::size_t dims) {
        if (spacing.size() != dims)
            throw std::invalid_argument("LabelMap: spacing length must equal dims");
        for (double s : spacing)
            if (!(s > 0.0))
                throw std::invalid_argument("LabelMap: spacing must be positive");
    }

    std::vector<std::size_t> shape_;
    std::vector<label_t> data_;
    std::vector<double> spacing_;
};

inline void require_same_grid(const LabelMap& a, const LabelMap& b,
                              const char* where) {
    if (!a.same_grid(b))
        throw std::invalid_argument(std::string(where) +
                                    ": maps must share dims and shape");
}

/// Foreground indicator: label > 0 becomes 1, background stays 0.
inline LabelMap binarize(const LabelMap& map) {
    LabelMap out(map.shape(), map.spacing());
    for (std::size_t i = 0; i < map.size(); ++i)
        out[i] = map[i] > 0 ? 1 : 0;
    return out;
}

/// Binarize against a class subset: voxels whose label is in `classes`
/// become 1, everything else 0. Used to pick one channel out of a
/// multi-class semantic map before instance approximation.
inline LabelMap binarize_selected(const LabelMap& map,
                                  std::span<const label_t> classes) {
    std::unordered_set<label_t> keep(classes.begin(), classes.end());
    keep.erase(0);
    LabelMap out(map.shape(), map.spacing());
    for (std::size_t i = 0; i < map.size(); ++i)
        out[i] = keep.count(map[i]) ? 1 : 0;
    return out;
}

/// Minimal box containing every nonzero voxel of either map. Both empty
/// yields the empty box (lo == hi == zero vector).
inline BoundingBox joint_bounding_box(const LabelMap& a, const LabelMap& b) {
    require_same_grid(a, b, "joint_bounding_box");
    const int d = a.dims();
    std::vector<std::size_t> lo(d, 0), hi(d, 0);
    bool seen = false;

    auto scan = [&](const LabelMap& m) {
        const auto s3 = m.shape3();
        std::size_t i = 0;
        for (std::size_t z = 0; z < s3[0]; ++z)
            for (std::size_t y = 0; y < s3[1]; ++y)
                for (std::size_t x = 0; x < s3[2]; ++x, ++i) {
                    if (m[i] == 0) continue;
                    std::array<std::size_t, 3> c{z, y, x};
                    const std::size_t off = 3 - static_cast<std::size_t>(d);
                    if (!seen) {
                        for (int k = 0; k < d; ++k) {
                            lo[k] = c[off + k];
                            hi[k] = c[off + k] + 1;
                        }
                        seen = true;
                    } else {
                        for (int k = 0; k < d; ++k) {
                            lo[k] = std::min(lo[k], c[off + k]);
                            hi[k] = std::max(hi[k], c[off + k] + 1);
                        }
                    }
                }
    };
    scan(a);
    scan(b);
    return BoundingBox{std::move(lo), std::move(hi)};
}

inline void check_box(const BoundingBox& box, const LabelMap& map) {
    if (box.lo.size() != static_cast<std::size_t>(map.dims()) ||
        box.hi.size() != box.lo.size())
        throw std::invalid_argument("crop: box dimensionality mismatch");
    for (std::size_t k = 0; k < box.lo.size(); ++k) {
        if (box.lo[k] > box.hi[k] || box.hi[k] > map.shape()[k])
            throw std::invalid_argument("crop: box out of range");
    }
}

/// Sub-map covering `box` dilated by `margin` voxels per side, clamped to
/// the map bounds. Labels are copied unchanged. An empty box with margin 0
/// has no voxels to return and is rejected.
inline LabelMap crop(const LabelMap& map, const BoundingBox& box,
                     std::size_t margin = 0) {
    check_box(box, map);
    const int d = map.dims();
    std::vector<std::size_t> lo(d), hi(d), out_shape(d);
    for (int k = 0; k < d; ++k) {
        lo[k] = box.lo[k] > margin ? box.lo[k] - margin : 0;
        hi[k] = std::min(box.hi[k] + margin, map.shape()[k]);
        if (lo[k] >= hi[k])
            throw std::invalid_argument("crop: empty box yields no voxels");
        out_shape[k] = hi[k] - lo[k];
    }

    // Normalized 3D copy loop; leading axis collapses for 2D.
    std::array<std::size_t, 3> lo3{0, 0, 0}, ext3{1, 1, 1};
    for (int k = 0; k < d; ++k) {
        lo3[3 - d + k] = lo[k];
        ext3[3 - d + k] = out_shape[k];
    }
    const auto st = map.strides3();
    LabelMap out(out_shape, map.spacing());
    std::size_t o = 0;
    for (std::size_t z = 0; z < ext3[0]; ++z)
        for (std::size_t y = 0; y < ext3[1]; ++y) {
            std::size_t base = (lo3[0] + z) * st[0] + (lo3[1] + y) * st[1] + lo3[2];
            for (std::size_t x = 0; x < ext3[2]; ++x, ++o)
                out[o] = map[base + x];
        }
    return out;
}

/// Ascending, duplicate-free positive labels present in the map.
inline std::vector<label_t> unique_labels(const LabelMap& map) {
    std::unordered_set<label_t> seen;
    for (std::size_t i = 0; i < map.size(); ++i)
        if (map[i] != 0) seen.insert(map[i]);
    std::vector<label_t> out(seen.begin(), seen.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace pqeval
