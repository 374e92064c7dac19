#include "cvgc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace cvgc {

void CgaConfig::validate() const {
    if (!(spacing_min > 0.0 && spacing_min <= spacing_max))
        throw InvalidArgument("spacing range must satisfy 0 < min <= max");
    if (!(angular_resolution > 0.0))
        throw InvalidArgument("angular resolution must be > 0");
    if (view_heights.empty()) throw InvalidArgument("view heights must be non-empty");
    for (double h : view_heights)
        if (!(h > 0.0)) throw InvalidArgument("view heights must be > 0");
}

CgaMode parse_cga_mode(const std::string& name) {
    if (name == "density_only") return CgaMode::density_only;
    if (name == "visibility_only") return CgaMode::visibility_only;
    if (name == "both") return CgaMode::both;
    if (name == "random_pick") return CgaMode::random_pick;
    throw InvalidArgument("unknown cga mode: " + name);
}

std::string cga_mode_name(CgaMode mode) {
    switch (mode) {
        case CgaMode::density_only: return "density_only";
        case CgaMode::visibility_only: return "visibility_only";
        case CgaMode::both: return "both";
        default: return "random_pick";
    }
}

PointCloud densify(const PointCloud& cloud, std::size_t K, double r,
                   std::size_t normal_k, RngStream& rng, AugmentStats* stats) {
    if (cloud.empty()) throw EmptyInput("densify: empty cloud");
    if (!(r > 0.0)) throw InvalidArgument("densify: disk radius must be > 0");
    if (K == 0) return cloud;
    if (cloud.size() < 3)
        throw InvalidArgument("densify: need >= 3 points for normal estimation");

    const NeighborIndex index(cloud.points);
    PointCloud out = cloud;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        LocalFrame frame;
        try {
            frame = local_frame(estimate_normal(index, j, normal_k));
        } catch (const DegenerateGeometry&) {
            if (stats) ++stats->degenerate_normals;
            continue;
        }
        for (std::size_t s = 0; s < K; ++s) {
            const double rho = r * std::sqrt(rng.uniform());
            const double ang = 2.0 * std::numbers::pi * rng.uniform();
            const Point3 offset =
                rho * std::cos(ang) * frame.u + rho * std::sin(ang) * frame.v;
            out.points.push_back(cloud.points[j] + offset);
            if (out.labels) out.labels->push_back((*cloud.labels)[j]);
            if (out.features) out.features->push_back((*cloud.features)[j]);
        }
    }
    return out;
}

PointCloud sparsify(const PointCloud& cloud, double v) {
    if (cloud.empty()) throw EmptyInput("sparsify: empty cloud");
    if (!(v > 0.0)) throw InvalidArgument("sparsify: voxel size must be > 0");

    struct Cell {
        Point3 sum{};
        std::size_t count = 0;
        std::vector<std::size_t> ids;
    };
    std::unordered_map<VoxelCoord, Cell, VoxelCoordHash> cells;
    cells.reserve(cloud.size());
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        Cell& c = cells[voxel_index(cloud.points[j], v)];
        c.sum = c.sum + cloud.points[j];
        ++c.count;
        c.ids.push_back(j);
    }

    std::vector<std::size_t> keep;
    keep.reserve(cells.size());
    for (const auto& [u, cell] : cells) {
        const Point3 centroid = (1.0 / static_cast<double>(cell.count)) * cell.sum;
        std::size_t best = cell.ids[0];
        double best_d = dist(cloud.points[best], centroid);
        for (std::size_t id : cell.ids) {
            const double d = dist(cloud.points[id], centroid);
            if (d < best_d) {  // ids ascend, so strict < keeps the lowest index on ties
                best = id;
                best_d = d;
            }
        }
        keep.push_back(best);
    }
    std::sort(keep.begin(), keep.end());
    return cloud.select(keep);
}

double estimate_mean_spacing(const PointCloud& cloud, std::size_t sample_size) {
    if (cloud.size() < 2)
        throw InvalidArgument("estimate_mean_spacing: need >= 2 points");
    sample_size = std::min<std::size_t>({sample_size, cloud.size(), 10000});
    if (sample_size == 0) sample_size = 1;

    const NeighborIndex index(cloud.points);
    const std::size_t stride = std::max<std::size_t>(1, cloud.size() / sample_size);
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < cloud.size() && n < sample_size; j += stride, ++n) {
        const auto nbrs = index.knn(cloud.points[j], 2);
        // nearest point with a different id (a coincident duplicate still counts)
        const Neighbor& nb = nbrs[0].id == j ? nbrs[1] : nbrs[0];
        total += nb.distance;
    }
    return total / static_cast<double>(n);
}

PointCloud resample_to_spacing(const PointCloud& cloud, double target,
                               const CgaConfig& cfg, RngStream& rng,
                               AugmentStats* stats) {
    cfg.validate();
    if (!(target >= cfg.spacing_min && target <= cfg.spacing_max))
        throw InvalidArgument("resample_to_spacing: target outside spacing range");
    const double s = estimate_mean_spacing(cloud);
    if (std::abs(target - s) <= 0.1 * s) return cloud;
    if (target > s) return sparsify(cloud, target);
    const double ratio = s / target;
    const std::size_t K =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * ratio - 1.0)));
    return densify(cloud, K, cfg.densify_radius_scale * s, cfg.normal_k, rng, stats);
}

Point3 sample_viewpoint(const PointCloud& cloud, std::optional<Label> ground_class,
                        const std::vector<double>& heights, RngStream& rng) {
    if (cloud.empty()) throw EmptyInput("sample_viewpoint: empty cloud");
    if (heights.empty()) throw InvalidArgument("sample_viewpoint: no heights");

    std::vector<std::size_t> candidates;
    if (ground_class && cloud.has_labels()) {
        for (std::size_t j = 0; j < cloud.size(); ++j)
            if ((*cloud.labels)[j] == *ground_class) candidates.push_back(j);
        if (candidates.empty())
            throw InvalidArgument("sample_viewpoint: no points with the ground class");
    } else {
        // lowest 5% by z, ties by index
        candidates.resize(cloud.size());
        std::iota(candidates.begin(), candidates.end(), std::size_t{0});
        const std::size_t m = std::max<std::size_t>(1, (cloud.size() + 19) / 20);
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](std::size_t a, std::size_t b) {
                             return cloud.points[a].z < cloud.points[b].z;
                         });
        candidates.resize(m);
    }
    const Point3 ground = cloud.points[candidates[rng.pick(candidates.size())]];
    const double h = heights[rng.pick(heights.size())];
    return {ground.x, ground.y, ground.z + h};
}

SphericalCoord to_spherical(const Point3& x, const Point3& viewpoint) {
    const Point3 d = x - viewpoint;
    const double r = norm(d);
    if (r == 0.0) throw InvalidArgument("to_spherical: point coincides with viewpoint");
    const double theta = std::acos(std::clamp(d.z / r, -1.0, 1.0));
    double phi = std::atan2(d.y, d.x);
    if (phi < 0.0) phi += 2.0 * std::numbers::pi;
    if (phi >= 2.0 * std::numbers::pi) phi = 0.0;
    return {r, theta, phi};
}

PointCloud visibility_filter(const PointCloud& cloud, const Point3& viewpoint,
                             double delta_alpha, AugmentStats* stats) {
    if (cloud.empty()) throw EmptyInput("visibility_filter: empty cloud");
    if (!(delta_alpha > 0.0))
        throw InvalidArgument("visibility_filter: delta_alpha must be > 0");

    const std::int64_t m_phi = static_cast<std::int64_t>(
        std::ceil(2.0 * std::numbers::pi / delta_alpha));

    struct Winner {
        double r;
        std::size_t id;
    };
    std::unordered_map<std::int64_t, Winner> bins;
    bins.reserve(cloud.size());
    std::size_t coincident = 0;
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        const Point3 d = cloud.points[j] - viewpoint;
        if (d.x == 0.0 && d.y == 0.0 && d.z == 0.0) {
            ++coincident;
            continue;
        }
        const SphericalCoord sc = to_spherical(cloud.points[j], viewpoint);
        const std::int64_t th = static_cast<std::int64_t>(std::floor(sc.theta / delta_alpha));
        const std::int64_t ph = static_cast<std::int64_t>(std::floor(sc.phi / delta_alpha));
        const std::int64_t h = th * m_phi + ph;
        auto [it, inserted] = bins.try_emplace(h, Winner{sc.r, j});
        if (!inserted && sc.r < it->second.r) it->second = {sc.r, j};
    }
    if (stats) stats->dropped_coincident += coincident;
    if (bins.empty()) throw EmptyInput("visibility_filter: all points coincide with viewpoint");

    std::vector<std::size_t> keep;
    keep.reserve(bins.size());
    for (const auto& [h, w] : bins) keep.push_back(w.id);
    std::sort(keep.begin(), keep.end());
    return cloud.select(keep);
}

PointCloud cga(const PointCloud& cloud, const CgaConfig& cfg, RngStream& rng,
               AugmentStats* stats) {
    cfg.validate();
    if (cloud.size() < 2) throw InvalidArgument("cga: need >= 2 points");

    CgaMode mode = cfg.mode;
    if (mode == CgaMode::random_pick)
        mode = rng.uniform() < 0.5 ? CgaMode::density_only : CgaMode::visibility_only;

    auto density_pass = [&](const PointCloud& in) {
        const double target =
            cfg.spacing_min + (cfg.spacing_max - cfg.spacing_min) * rng.uniform();
        return resample_to_spacing(in, target, cfg, rng, stats);
    };
    auto visibility_pass = [&](const PointCloud& in) {
        const Point3 vp = sample_viewpoint(in, std::nullopt, cfg.view_heights, rng);
        return visibility_filter(in, vp, cfg.angular_resolution, stats);
    };

    switch (mode) {
        case CgaMode::density_only: return density_pass(cloud);
        case CgaMode::visibility_only: return visibility_pass(cloud);
        case CgaMode::both: return visibility_pass(density_pass(cloud));
        default: throw InvalidArgument("cga: unreachable mode");
    }
}

}  // namespace cvgc
