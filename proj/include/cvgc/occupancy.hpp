#pragma once

#include <iosfwd>
#include <set>
#include <vector>

#include "cvgc/augment.hpp"
#include "cvgc/core.hpp"
#include "cvgc/neighbors.hpp"

namespace cvgc {

// Inclusive integer-voxel domain.
struct VoxelDomain {
    VoxelCoord min;
    VoxelCoord max;

    bool contains(const VoxelCoord& u) const {
        return u.i >= min.i && u.i <= max.i && u.j >= min.j && u.j <= max.j &&
               u.k >= min.k && u.k <= max.k;
    }
    std::size_t volume() const {
        return static_cast<std::size_t>(max.i - min.i + 1) *
               static_cast<std::size_t>(max.j - min.j + 1) *
               static_cast<std::size_t>(max.k - min.k + 1);
    }
};

// Binary occupancy over a bounded voxel domain; voxels not in
// `occupied` are observable free space.
struct OccupancyGrid {
    double v = 1.0;
    VoxelDomain domain;
    std::set<VoxelCoord> occupied;

    bool is_occupied(const VoxelCoord& u) const { return occupied.count(u) > 0; }

    // All domain voxels in lexicographic (i, j, k) order.
    std::vector<VoxelCoord> domain_voxels() const;

    Point3 voxel_center(const VoxelCoord& u) const {
        return {(static_cast<double>(u.i) + 0.5) * v,
                (static_cast<double>(u.j) + 0.5) * v,
                (static_cast<double>(u.k) + 0.5) * v};
    }
};

struct VoxelFeatures {
    std::vector<VoxelCoord> coords;  // lexicographic order over the domain
    std::vector<FeatureVec> feats;

    std::size_t dim() const { return feats.empty() ? 0 : feats[0].size(); }
};

// Two-layer per-voxel head: affine -> ReLU -> affine -> sigmoid.
struct HeadParams {
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    std::vector<double> w1;  // hidden x input_dim, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;

    static HeadParams init(std::size_t input_dim, std::size_t hidden, RngStream& rng);
};

OccupancyGrid build_occupancy(const PointCloud& cloud, double v,
                              const std::optional<VoxelDomain>& domain = std::nullopt);

// Inverse-distance weighted KNN feature interpolation onto every voxel
// center of the grid domain, occupied or free.
VoxelFeatures aggregate_voxel_features(const OccupancyGrid& grid, const PointCloud& cloud,
                                       std::size_t k, double eps);

std::vector<double> head_forward(const HeadParams& params, const VoxelFeatures& vf);

// Summed (not averaged) binary cross-entropy against the grid's
// occupancy bits, probabilities clamped to [1e-7, 1 - 1e-7].
double bce_loss(const std::vector<double>& probs, const OccupancyGrid& grid);

struct HeadGrad {
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;
};

HeadGrad bce_grad(const HeadParams& params, const VoxelFeatures& vf,
                  const OccupancyGrid& grid);

struct TrainResult {
    HeadParams params;
    std::vector<double> mean_loss_trace;  // loss / |domain| per step
};

TrainResult train_head(const HeadParams& initial, const VoxelFeatures& vf,
                       const OccupancyGrid& grid, std::size_t steps, double lr);

// Same descent over several (features, grid) views sharing one head.
TrainResult train_head_multi(const HeadParams& initial,
                             const std::vector<const VoxelFeatures*>& views,
                             const std::vector<const OccupancyGrid*>& grids,
                             std::size_t steps, double lr);

// Mean softmax cross-entropy over points whose label != ignore_id.
double semantic_ce_loss(const std::vector<std::vector<double>>& logits,
                        const std::vector<Label>& labels, Label ignore_id);

double total_loss(double sem_s, double sem_a, double bce_s, double bce_a);

// D=3 geometric stand-in features: height above the cloud minimum,
// log(1 + neighbor count within 1 m), |n_z|.
PointCloud handcrafted_features(const PointCloud& cloud, const NeighborIndex& index,
                                std::size_t normal_k);

// Plain-text grid format; bit-exact round trip.
std::string serialize_occupancy(const OccupancyGrid& grid);
OccupancyGrid parse_occupancy(std::istream& in);
void write_occupancy(const OccupancyGrid& grid, const std::string& path);
OccupancyGrid read_occupancy(const std::string& path);

}  // namespace cvgc
