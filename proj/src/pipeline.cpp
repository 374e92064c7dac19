#include "cvgc/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace cvgc {

PointCloud synthetic_scene(double extent, std::size_t approx_points, std::uint64_t seed) {
    if (!(extent > 0.0)) throw InvalidArgument("synthetic_scene: extent must be > 0");
    RngStream rng(seed);
    PointCloud cloud;
    cloud.labels.emplace();

    auto add = [&](const Point3& p, Label l) {
        cloud.points.push_back(p);
        cloud.labels->push_back(l);
    };

    // ~70% ground, ~25% boxes, ~5% posts
    const std::size_t n_ground = approx_points * 7 / 10;
    for (std::size_t t = 0; t < n_ground; ++t)
        add({extent * rng.uniform(), extent * rng.uniform(), 0.02 * rng.uniform()}, 0);

    struct Box {
        double cx, cy, w, d, h;
    };
    const Box boxes[3] = {{extent * 0.25, extent * 0.25, 6, 8, 5},
                          {extent * 0.70, extent * 0.30, 8, 6, 8},
                          {extent * 0.50, extent * 0.75, 10, 7, 4}};
    const std::size_t n_box = approx_points / 4 / 3;
    for (const Box& b : boxes) {
        for (std::size_t t = 0; t < n_box; ++t) {
            // pick a face: 4 walls + roof, weighted by area
            const double wall_a = 2.0 * (b.w + b.d) * b.h;
            const double roof_a = b.w * b.d;
            if (rng.uniform() * (wall_a + roof_a) < roof_a) {
                add({b.cx - b.w / 2 + b.w * rng.uniform(),
                     b.cy - b.d / 2 + b.d * rng.uniform(), b.h},
                    1);
            } else {
                const double u = rng.uniform() * 2.0 * (b.w + b.d);
                const double z = b.h * rng.uniform();
                double x, y;
                if (u < b.w) {
                    x = b.cx - b.w / 2 + u;
                    y = b.cy - b.d / 2;
                } else if (u < b.w + b.d) {
                    x = b.cx + b.w / 2;
                    y = b.cy - b.d / 2 + (u - b.w);
                } else if (u < 2 * b.w + b.d) {
                    x = b.cx - b.w / 2 + (u - b.w - b.d);
                    y = b.cy + b.d / 2;
                } else {
                    x = b.cx - b.w / 2;
                    y = b.cy - b.d / 2 + (u - 2 * b.w - b.d);
                }
                add({x, y, z}, 1);
            }
        }
    }

    const std::size_t n_posts = 12;
    const std::size_t per_post = std::max<std::size_t>(8, approx_points / 20 / n_posts);
    for (std::size_t p = 0; p < n_posts; ++p) {
        const double px = extent * rng.uniform();
        const double py = extent * rng.uniform();
        const double height = 8.0 + 8.0 * rng.uniform();  // masts and street lights
        for (std::size_t t = 0; t < per_post; ++t)
            add({px + 0.02 * (rng.uniform() - 0.5), py + 0.02 * (rng.uniform() - 0.5),
                 height * rng.uniform()},
                2);
    }
    return cloud;
}

GcrDemoResult run_gcr_demo(const PointCloud& source, const RunConfig& cfg,
                           std::size_t steps, double lr) {
    if (source.size() < 2) throw InvalidArgument("gcr-demo: need >= 2 points");

    RngStream rng(cfg.seed);
    const double v = cfg.occupancy_voxel;

    const OccupancyGrid grid_s = build_occupancy(source, v);
    const PointCloud augmented = cga(source, cfg.cga, rng);
    const OccupancyGrid grid_a = build_occupancy(augmented, v);

    const NeighborIndex index_s(source.points);
    const NeighborIndex index_a(augmented.points);
    const PointCloud feat_s = handcrafted_features(source, index_s, cfg.cga.normal_k);
    const PointCloud feat_a = handcrafted_features(augmented, index_a, cfg.cga.normal_k);

    const VoxelFeatures vf_s =
        aggregate_voxel_features(grid_s, feat_s, cfg.aggregation_k, cfg.aggregation_eps);
    const VoxelFeatures vf_a =
        aggregate_voxel_features(grid_s, feat_a, cfg.aggregation_k, cfg.aggregation_eps);

    const HeadParams initial = HeadParams::init(feat_s.feature_dim(), 16, rng);
    // both BCE terms supervise against the source-built occupancy
    const TrainResult trained =
        train_head_multi(initial, {&vf_s, &vf_a}, {&grid_s, &grid_s}, steps, lr);

    GcrDemoResult result;
    result.mean_loss_trace = trained.mean_loss_trace;
    result.domain_voxels = grid_s.domain.volume();
    result.source_occupied = grid_s.occupied.size();
    result.augmented_occupied = grid_a.occupied.size();
    result.augmented_subset_of_source =
        std::includes(grid_s.occupied.begin(), grid_s.occupied.end(),
                      grid_a.occupied.begin(), grid_a.occupied.end());

    result.bce_source = bce_loss(head_forward(trained.params, vf_s), grid_s);
    result.bce_augmented = bce_loss(head_forward(trained.params, vf_a), grid_s);

    // fixed linear probe over the handcrafted features as the semantic head
    if (source.has_labels()) {
        Label max_label = 0;
        for (Label l : *source.labels)
            if (l != kDefaultIgnoreId) max_label = std::max(max_label, l);
        const std::size_t num_classes = std::max<std::size_t>(2, max_label + 1);
        const std::size_t dim = feat_s.feature_dim();
        std::vector<std::vector<double>> w(num_classes, std::vector<double>(dim + 1));
        for (auto& row : w)
            for (double& x : row) x = -0.1 + 0.2 * rng.uniform();

        auto probe = [&](const PointCloud& feats) {
            std::vector<std::vector<double>> logits(feats.size());
            for (std::size_t j = 0; j < feats.size(); ++j) {
                std::vector<double> row(num_classes);
                for (std::size_t c = 0; c < num_classes; ++c) {
                    double z = w[c][dim];
                    for (std::size_t d = 0; d < dim; ++d)
                        z += w[c][d] * (*feats.features)[j][d];
                    row[c] = z;
                }
                logits[j] = std::move(row);
            }
            return logits;
        };
        result.sem_source =
            semantic_ce_loss(probe(feat_s), *source.labels, kDefaultIgnoreId);
        if (augmented.has_labels())
            result.sem_augmented =
                semantic_ce_loss(probe(feat_a), *augmented.labels, kDefaultIgnoreId);
    }

    result.total = total_loss(result.sem_source, result.sem_augmented,
                              result.bce_source, result.bce_augmented);
    return result;
}

}  // namespace cvgc
