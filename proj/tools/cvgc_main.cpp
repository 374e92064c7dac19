#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include "cvgc/io.hpp"
#include "cvgc/metrics.hpp"
#include "cvgc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cvgc;

namespace {

std::string ext_of(const std::string& path) {
    const std::string e = fs::path(path).extension().string();
    return e.empty() ? ".xyz" : e;
}

std::vector<double> parse_heights(const std::string& csv) {
    std::vector<double> out;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

int cmd_info(const std::string& in) {
    const PointCloud cloud = read_cloud(in);
    std::printf("points=%zu\n", cloud.size());
    if (!cloud.empty()) {
        const Aabb box = bbox(cloud);
        std::printf("bbox_min=%.9g %.9g %.9g\n", box.min.x, box.min.y, box.min.z);
        std::printf("bbox_max=%.9g %.9g %.9g\n", box.max.x, box.max.y, box.max.z);
    }
    if (cloud.has_labels()) {
        std::map<Label, std::size_t> hist;
        for (Label l : *cloud.labels) ++hist[l];
        for (const auto& [l, n] : hist) std::printf("label=%u count=%zu\n", l, n);
    }
    if (cloud.size() >= 2)
        std::printf("mean_spacing=%.9g\n", estimate_mean_spacing(cloud));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-view point cloud augmentation and consistency toolkit"};
    app.require_subcommand(1);

    std::string in, out, outdir, map_path, mode = "random_pick", heights_csv,
                preset = "group1";
    double patch = 32.0, overlap = 0.5, voxel = 0.5, radius = 0.1, delta_alpha = 0.01,
           lr = 0.1;
    std::uint64_t seed = 0;
    std::size_t K = 1, normal_k = 16, steps = 200, classes = 5;
    std::int64_t ground_class = -1, ignore = kDefaultIgnoreId;

    auto* info = app.add_subcommand("info", "summarize a point cloud file");
    info->add_option("in", in)->required();

    auto* tile_cmd = app.add_subcommand("tile", "split into horizontal patches");
    tile_cmd->add_option("in", in)->required();
    tile_cmd->add_option("outdir", outdir)->required();
    tile_cmd->add_option("--patch", patch);
    tile_cmd->add_option("--overlap", overlap);

    auto* remap = app.add_subcommand("remap", "apply a label map");
    remap->add_option("in", in)->required();
    remap->add_option("out", out)->required();
    remap->add_option("--map", map_path)->required();

    auto* dens = app.add_subcommand("densify", "tangent-disk upsampling");
    dens->add_option("in", in)->required();
    dens->add_option("out", out)->required();
    dens->add_option("--k", K);
    dens->add_option("--radius", radius);
    dens->add_option("--normal-k", normal_k);
    dens->add_option("--seed", seed);

    auto* spars = app.add_subcommand("sparsify", "voxel centroid-nearest downsampling");
    spars->add_option("in", in)->required();
    spars->add_option("out", out)->required();
    spars->add_option("--voxel", voxel);

    auto* vis = app.add_subcommand("visibility", "hidden-point-removal simulation");
    vis->add_option("in", in)->required();
    vis->add_option("out", out)->required();
    vis->add_option("--seed", seed);
    vis->add_option("--delta-alpha", delta_alpha);
    vis->add_option("--heights", heights_csv);
    vis->add_option("--ground-class", ground_class);

    auto* cga_cmd = app.add_subcommand("cga", "full cross-view augmentation draw");
    cga_cmd->add_option("in", in)->required();
    cga_cmd->add_option("out", out)->required();
    cga_cmd->add_option("--mode", mode);
    cga_cmd->add_option("--seed", seed);
    cga_cmd->add_option("--preset", preset);

    auto* occ = app.add_subcommand("occupancy", "binary occupancy grid");
    occ->add_option("in", in)->required();
    occ->add_option("out", out)->required();
    double occ_voxel = 1.0;
    occ->add_option("--voxel", occ_voxel);

    auto* demo = app.add_subcommand("gcr-demo", "desk-scale consistency training run");
    demo->add_option("src", in)->required();
    demo->add_option("--seed", seed);
    demo->add_option("--steps", steps);
    demo->add_option("--lr", lr);
    std::string demo_mode = "visibility_only";
    demo->add_option("--mode", demo_mode);

    auto* eval = app.add_subcommand("eval", "IoU / mIoU report");
    eval->add_option("gt", in)->required();
    std::string pred_path;
    eval->add_option("pred", pred_path)->required();
    eval->add_option("--classes", classes)->required();
    eval->add_option("--ignore", ignore);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*info) return cmd_info(in);

        if (*tile_cmd) {
            const PointCloud cloud = read_cloud(in);
            fs::create_directories(outdir);
            const std::string ext = ext_of(in);
            for (const Patch& p : tile(cloud, patch, overlap)) {
                char name[64];
                std::snprintf(name, sizeof(name), "patch_%lld_%lld",
                              static_cast<long long>(p.ix), static_cast<long long>(p.iy));
                write_cloud(p.cloud, (fs::path(outdir) / (std::string(name) + ext)).string());
            }
            return 0;
        }

        if (*remap) {
            const PointCloud cloud = read_cloud(in);
            write_cloud(remap_labels(cloud, read_label_map(map_path)), out);
            return 0;
        }

        if (*dens) {
            const PointCloud cloud = read_cloud(in);
            RngStream rng(seed);
            AugmentStats stats;
            write_cloud(densify(cloud, K, radius, normal_k, rng, &stats), out);
            if (stats.degenerate_normals > 0)
                std::fprintf(stderr, "warning: %zu points with degenerate normals\n",
                             stats.degenerate_normals);
            return 0;
        }

        if (*spars) {
            write_cloud(sparsify(read_cloud(in), voxel), out);
            return 0;
        }

        if (*vis) {
            const PointCloud cloud = read_cloud(in);
            RngStream rng(seed);
            const std::vector<double> heights = heights_csv.empty()
                                                    ? CgaConfig{}.view_heights
                                                    : parse_heights(heights_csv);
            std::optional<Label> gc;
            if (ground_class >= 0) gc = static_cast<Label>(ground_class);
            const Point3 vp = sample_viewpoint(cloud, gc, heights, rng);
            AugmentStats stats;
            write_cloud(visibility_filter(cloud, vp, delta_alpha, &stats), out);
            if (stats.dropped_coincident > 0)
                std::fprintf(stderr, "warning: %zu points coincident with the viewpoint\n",
                             stats.dropped_coincident);
            return 0;
        }

        if (*cga_cmd) {
            const PointCloud cloud = read_cloud(in);
            RunConfig cfg = RunConfig::preset(preset);
            cfg.seed = seed;
            cfg.cga.mode = parse_cga_mode(mode);
            RngStream rng(seed);
            write_cloud(cga(cloud, cfg.cga, rng), out);
            return 0;
        }

        if (*occ) {
            write_occupancy(build_occupancy(read_cloud(in), occ_voxel), out);
            return 0;
        }

        if (*demo) {
            const PointCloud cloud = read_cloud(in);
            RunConfig cfg;
            cfg.seed = seed;
            cfg.cga.mode = parse_cga_mode(demo_mode);
            const GcrDemoResult r = run_gcr_demo(cloud, cfg, steps, lr);
            std::printf("domain_voxels=%zu\n", r.domain_voxels);
            std::printf("source_occupied=%zu\n", r.source_occupied);
            std::printf("augmented_occupied=%zu\n", r.augmented_occupied);
            std::printf("augmented_subset_of_source=%s\n",
                        r.augmented_subset_of_source ? "true" : "false");
            std::printf("initial_mean_bce=%.9g\n", r.mean_loss_trace.front());
            std::printf("final_mean_bce=%.9g\n", r.mean_loss_trace.back());
            std::printf("sem_s=%.17g\n", r.sem_source);
            std::printf("sem_a=%.17g\n", r.sem_augmented);
            std::printf("bce_s=%.17g\n", r.bce_source);
            std::printf("bce_a=%.17g\n", r.bce_augmented);
            std::printf("total=%.17g\n", r.total);
            return 0;
        }

        if (*eval) {
            const PointCloud gt = read_cloud(in);
            const PointCloud pred = read_cloud(pred_path);
            if (!gt.has_labels() || !pred.has_labels())
                throw MissingLabels("eval: both files must carry labels");
            ConfusionMatrix cm(classes);
            accumulate(cm, *gt.labels, *pred.labels, static_cast<Label>(ignore));
            std::fputs(metrics_report(cm).c_str(), stdout);
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
