#pragma once

#include <string>
#include <vector>

#include "cvgc/io.hpp"
#include "cvgc/occupancy.hpp"

namespace cvgc {

// Labeled synthetic scene: ground plane, boxes, posts. Classes:
// 0 ground, 1 building, 2 pole.
PointCloud synthetic_scene(double extent, std::size_t approx_points, std::uint64_t seed);

struct GcrDemoResult {
    double sem_source = 0.0;
    double sem_augmented = 0.0;
    double bce_source = 0.0;
    double bce_augmented = 0.0;
    double total = 0.0;
    std::vector<double> mean_loss_trace;
    std::size_t domain_voxels = 0;
    std::size_t source_occupied = 0;
    std::size_t augmented_occupied = 0;
    bool augmented_subset_of_source = false;
};

// Desk-scale consistency run: build the source occupancy, generate an
// augmented view, aggregate handcrafted features for both over the
// source domain, train the shared head on both BCE terms, and evaluate
// the four-component loss breakdown.
GcrDemoResult run_gcr_demo(const PointCloud& source, const RunConfig& cfg,
                           std::size_t steps, double lr);

}  // namespace cvgc
