#pragma once

#include <optional>
#include <string>

#include "cvgc/augment.hpp"
#include "cvgc/core.hpp"

namespace cvgc {

enum class CloudFileFormat { XYZL_ASCII, PLY_ASCII, PLY_BINARY_LE };

// From extension (.xyz/.txt -> XYZL) or the PLY header's format line.
CloudFileFormat infer_format(const std::string& path, bool for_reading);

PointCloud read_cloud(const std::string& path,
                      std::optional<CloudFileFormat> format = std::nullopt);

// Deterministic byte output; formats carry xyz + optional label only.
// Returns false when feature vectors had to be dropped.
bool write_cloud(const PointCloud& cloud, const std::string& path,
                 std::optional<CloudFileFormat> format = std::nullopt);

// Lines "src dst"; '#' comments and blank lines skipped.
LabelMap read_label_map(const std::string& path, Label ignore_id = kDefaultIgnoreId);

struct RunConfig {
    std::uint64_t seed = 0;
    CgaConfig cga;
    double occupancy_voxel = 1.0;  // meters
    std::size_t aggregation_k = 3;
    double aggregation_eps = 1e-8;  // meters
    double patch = 32.0;            // meters
    double overlap = 0.5;
    double segmentation_voxel = 0.25;  // meters
    std::string label_map_path;

    // "group1": 32 m patches, 0.25 m segmentation voxel (default).
    // "group2": 50 m patches, 0.3 m segmentation voxel.
    static RunConfig preset(const std::string& name);

    // key = value lines mirroring the field names; '#' comments allowed.
    static RunConfig from_file(const std::string& path);
};

}  // namespace cvgc
