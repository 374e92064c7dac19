#include "cvgc/core.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace cvgc {

void PointCloud::validate() const {
    if (labels && labels->size() != points.size())
        throw InvalidArgument("labels length does not match point count");
    if (features) {
        if (features->size() != points.size())
            throw InvalidArgument("features length does not match point count");
        if (!features->empty()) {
            const std::size_t d = (*features)[0].size();
            if (d < 1) throw InvalidArgument("feature dimension must be >= 1");
            for (const auto& f : *features)
                if (f.size() != d)
                    throw InvalidArgument("inconsistent feature dimensions");
        }
    }
}

PointCloud PointCloud::select(const std::vector<std::size_t>& ids) const {
    PointCloud out;
    out.points.reserve(ids.size());
    for (std::size_t id : ids) out.points.push_back(points[id]);
    if (labels) {
        out.labels.emplace();
        out.labels->reserve(ids.size());
        for (std::size_t id : ids) out.labels->push_back((*labels)[id]);
    }
    if (features) {
        out.features.emplace();
        out.features->reserve(ids.size());
        for (std::size_t id : ids) out.features->push_back((*features)[id]);
    }
    return out;
}

VoxelCoord voxel_index(const Point3& x, double v) {
    if (!(v > 0.0)) throw InvalidArgument("voxel size must be > 0");
    if (!x.finite()) throw InvalidArgument("non-finite point");
    return {static_cast<std::int64_t>(std::floor(x.x / v)),
            static_cast<std::int64_t>(std::floor(x.y / v)),
            static_cast<std::int64_t>(std::floor(x.z / v))};
}

Aabb bbox(const std::vector<Point3>& points) {
    if (points.empty()) throw EmptyInput("bbox of empty point set");
    Aabb box{points[0], points[0]};
    for (const Point3& p : points) {
        box.min.x = std::min(box.min.x, p.x);
        box.min.y = std::min(box.min.y, p.y);
        box.min.z = std::min(box.min.z, p.z);
        box.max.x = std::max(box.max.x, p.x);
        box.max.y = std::max(box.max.y, p.y);
        box.max.z = std::max(box.max.z, p.z);
    }
    return box;
}

Aabb bbox(const PointCloud& cloud) {
    return bbox(cloud.points);
}

PointCloud remap_labels(const PointCloud& cloud, const LabelMap& map) {
    if (!cloud.has_labels()) throw MissingLabels("remap_labels: cloud has no labels");
    PointCloud out = cloud;
    for (Label& l : *out.labels) l = map.apply(l);
    return out;
}

namespace {

// Number of patch origins along one axis: grow until the last patch
// covers the maximum coordinate.
std::int64_t origin_count(double lo, double hi, double patch, double stride) {
    std::int64_t n = 1;
    while (lo + static_cast<double>(n - 1) * stride + patch <= hi) ++n;
    return n;
}

}  // namespace

std::vector<Patch> tile(const PointCloud& cloud, double patch, double overlap) {
    if (cloud.empty()) throw EmptyInput("tile: empty cloud");
    if (!(patch > 0.0)) throw InvalidArgument("patch size must be > 0");
    if (!(overlap >= 0.0 && overlap < 1.0))
        throw InvalidArgument("overlap must be in [0, 1)");

    const Aabb box = bbox(cloud);
    const double stride = patch * (1.0 - overlap);
    const std::int64_t nx = origin_count(box.min.x, box.max.x, patch, stride);
    const std::int64_t ny = origin_count(box.min.y, box.max.y, patch, stride);

    std::vector<Patch> patches;
    for (std::int64_t ix = 0; ix < nx; ++ix) {
        for (std::int64_t iy = 0; iy < ny; ++iy) {
            const double ox = box.min.x + static_cast<double>(ix) * stride;
            const double oy = box.min.y + static_cast<double>(iy) * stride;
            std::vector<std::size_t> ids;
            for (std::size_t p = 0; p < cloud.size(); ++p) {
                const Point3& q = cloud.points[p];
                if (q.x >= ox && q.x < ox + patch && q.y >= oy && q.y < oy + patch)
                    ids.push_back(p);
            }
            if (ids.empty()) continue;
            patches.push_back({ix, iy, cloud.select(ids)});
        }
    }
    return patches;
}

unsigned worker_count() {
    if (const char* env = std::getenv("CVGC_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<unsigned>(n);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

}  // namespace cvgc
