#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cvgc/core.hpp"
#include "cvgc/neighbors.hpp"

namespace cvgc {

// Seedable stream; mt19937_64 output is specified by the standard, so a
// given seed reproduces the same byte sequence on every platform.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    // uniform double in [0, 1)
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    std::uint64_t pick(std::uint64_t n) { return engine_() % n; }

    // independent sub-stream for parallel per-patch work
    RngStream substream(std::uint64_t index) const {
        return RngStream(seed_mix_ ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    }

    static RngStream seeded(std::uint64_t seed) {
        RngStream s(seed);
        s.seed_mix_ = seed;
        return s;
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_mix_ = 0;
};

struct SphericalCoord {
    double r = 0.0;      // meters, >= 0
    double theta = 0.0;  // [0, pi]
    double phi = 0.0;    // [0, 2*pi)
};

enum class CgaMode { density_only, visibility_only, both, random_pick };

struct CgaConfig {
    double spacing_min = 0.01;   // meters
    double spacing_max = 0.5;    // meters
    std::vector<double> view_heights = {2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
    double angular_resolution = 0.01;  // radians
    double densify_radius_scale = 0.5;
    std::size_t normal_k = 16;
    CgaMode mode = CgaMode::random_pick;

    void validate() const;
};

CgaMode parse_cga_mode(const std::string& name);
std::string cga_mode_name(CgaMode mode);

// Non-fatal event counters surfaced to callers that care.
struct AugmentStats {
    std::size_t degenerate_normals = 0;
    std::size_t dropped_coincident = 0;
};

// Tangent-disk upsampling: K synthetic points per input point, uniform
// in a disk of radius r on the local tangent plane. Synthetic points
// inherit the parent's label and features. Points with degenerate
// normals emit no samples but are kept.
PointCloud densify(const PointCloud& cloud, std::size_t K, double r,
                   std::size_t normal_k, RngStream& rng,
                   AugmentStats* stats = nullptr);

// One representative per occupied voxel: the point nearest the voxel's
// point centroid, ties to the lowest index. Input order preserved.
PointCloud sparsify(const PointCloud& cloud, double v);

// Mean distance to the nearest distinct neighbor over a deterministic
// strided sample of at most sample_size points.
double estimate_mean_spacing(const PointCloud& cloud, std::size_t sample_size = 1000);

// Adjust density toward a target mean spacing: sparsify when the target
// is coarser, densify when finer, identity within 10%.
PointCloud resample_to_spacing(const PointCloud& cloud, double target,
                               const CgaConfig& cfg, RngStream& rng,
                               AugmentStats* stats = nullptr);

// A virtual viewpoint above a random ground point (by label, or the
// lowest-5%-z points when unlabeled), at a height drawn from `heights`.
Point3 sample_viewpoint(const PointCloud& cloud, std::optional<Label> ground_class,
                        const std::vector<double>& heights, RngStream& rng);

SphericalCoord to_spherical(const Point3& x, const Point3& viewpoint);

// Hidden-point removal: bin by spherical angles at resolution
// delta_alpha, keep the minimum-radius point per bin.
PointCloud visibility_filter(const PointCloud& cloud, const Point3& viewpoint,
                             double delta_alpha, AugmentStats* stats = nullptr);

// Full cross-view augmentation draw per cfg.mode.
PointCloud cga(const PointCloud& cloud, const CgaConfig& cfg, RngStream& rng,
               AugmentStats* stats = nullptr);

}  // namespace cvgc
