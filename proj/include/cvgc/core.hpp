#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace cvgc {

// Error hierarchy. Every library failure is one of these; the CLI maps
// them to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidArgument : Error {
    using Error::Error;
};
struct EmptyInput : Error {
    using Error::Error;
};
struct MissingLabels : Error {
    using Error::Error;
};
struct MissingFeatures : Error {
    using Error::Error;
};
struct DegenerateGeometry : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
    friend bool operator==(const Point3&, const Point3&) = default;
};

inline Point3 operator+(const Point3& a, const Point3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
}
inline Point3 operator-(const Point3& a, const Point3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
}
inline Point3 operator*(double s, const Point3& a) {
    return {s * a.x, s * a.y, s * a.z};
}
inline double dot(const Point3& a, const Point3& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline Point3 cross(const Point3& a, const Point3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Point3& a) {
    return std::sqrt(dot(a, a));
}
inline double dist(const Point3& a, const Point3& b) {
    return norm(a - b);
}

// Distinguished label for points outside the shared taxonomy; excluded
// from losses and metrics.
inline constexpr std::uint32_t kDefaultIgnoreId = 255;

using Label = std::uint32_t;
using FeatureVec = std::vector<double>;

// Ordered point set with optional per-point labels and features.
// Filtering operations preserve the relative order of survivors.
class PointCloud {
public:
    std::vector<Point3> points;
    std::optional<std::vector<Label>> labels;
    std::optional<std::vector<FeatureVec>> features;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    bool has_labels() const { return labels.has_value(); }
    bool has_features() const { return features.has_value(); }

    std::size_t feature_dim() const {
        if (!features || features->empty()) return 0;
        return (*features)[0].size();
    }

    // Throws if labels/features lengths disagree with the point count.
    void validate() const;

    // New cloud holding the points at `ids`, attributes carried along.
    PointCloud select(const std::vector<std::size_t>& ids) const;
};

struct VoxelCoord {
    std::int64_t i = 0;
    std::int64_t j = 0;
    std::int64_t k = 0;

    friend bool operator==(const VoxelCoord&, const VoxelCoord&) = default;
    friend auto operator<=>(const VoxelCoord&, const VoxelCoord&) = default;
};

struct VoxelCoordHash {
    std::size_t operator()(const VoxelCoord& u) const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (std::int64_t c : {u.i, u.j, u.k}) {
            h ^= static_cast<std::uint64_t>(c);
            h *= 0x100000001b3ull;
        }
        return static_cast<std::size_t>(h);
    }
};

struct Aabb {
    Point3 min;
    Point3 max;

    bool contains(const Point3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
};

// Source class id -> shared class id; everything undeclared maps to ignore_id.
struct LabelMap {
    std::unordered_map<Label, Label> mapping;
    Label ignore_id = kDefaultIgnoreId;

    Label apply(Label src) const {
        auto it = mapping.find(src);
        return it == mapping.end() ? ignore_id : it->second;
    }
};

// Component-wise floor(x / v). Floor, not truncation: (-0.1, v=0.25) -> -1.
VoxelCoord voxel_index(const Point3& x, double v);

// Tight bounding box; throws EmptyInput on an empty cloud.
Aabb bbox(const PointCloud& cloud);

Aabb bbox(const std::vector<Point3>& points);

PointCloud remap_labels(const PointCloud& cloud, const LabelMap& map);

// Horizontal tiling with stride patch*(1-overlap), anchored at the bbox
// min. Patches are half-open in x and y; z is never partitioned. Empty
// patches are dropped.
struct Patch {
    std::int64_t ix = 0;
    std::int64_t iy = 0;
    PointCloud cloud;
};

std::vector<Patch> tile(const PointCloud& cloud, double patch, double overlap);

// Worker cap: CVGC_THREADS if set and > 0, otherwise hardware concurrency.
unsigned worker_count();

}  // namespace cvgc
