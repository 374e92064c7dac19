#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cvgc/io.hpp"
#include "cvgc/metrics.hpp"
#include "cvgc/pipeline.hpp"

namespace py = pybind11;
using namespace cvgc;

namespace {

PointCloud cloud_from_arrays(py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
                             std::optional<py::array_t<std::uint32_t>> labels) {
    if (xyz.ndim() != 2 || xyz.shape(1) != 3)
        throw py::value_error("points must be an (N, 3) array");
    PointCloud cloud;
    const std::size_t n = static_cast<std::size_t>(xyz.shape(0));
    cloud.points.reserve(n);
    auto r = xyz.unchecked<2>();
    for (std::size_t i = 0; i < n; ++i)
        cloud.points.push_back({r(i, 0), r(i, 1), r(i, 2)});
    if (labels) {
        auto l = labels->unchecked<1>();
        if (static_cast<std::size_t>(l.shape(0)) != n)
            throw py::value_error("labels length must match point count");
        cloud.labels.emplace();
        cloud.labels->reserve(n);
        for (std::size_t i = 0; i < n; ++i) cloud.labels->push_back(l(i));
    }
    return cloud;
}

py::array_t<double> points_to_array(const PointCloud& cloud) {
    py::array_t<double> out({cloud.size(), std::size_t{3}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        w(i, 0) = cloud.points[i].x;
        w(i, 1) = cloud.points[i].y;
        w(i, 2) = cloud.points[i].z;
    }
    return out;
}

py::object labels_to_array(const PointCloud& cloud) {
    if (!cloud.has_labels()) return py::none();
    py::array_t<std::uint32_t> out(cloud.size());
    auto w = out.mutable_unchecked<1>();
    for (std::size_t i = 0; i < cloud.size(); ++i) w(i) = (*cloud.labels)[i];
    return out;
}

py::tuple cloud_to_tuple(const PointCloud& cloud) {
    return py::make_tuple(points_to_array(cloud), labels_to_array(cloud));
}

}  // namespace

PYBIND11_MODULE(_cvgc, m) {
    m.doc() = "cross-view LiDAR augmentation, occupancy consistency, and metrics";

    py::register_exception<Error>(m, "CvgcError", PyExc_RuntimeError);

    m.def("voxel_index",
          [](double x, double y, double z, double v) {
              const VoxelCoord u = voxel_index({x, y, z}, v);
              return py::make_tuple(u.i, u.j, u.k);
          },
          py::arg("x"), py::arg("y"), py::arg("z"), py::arg("v"));

    m.def("sparsify",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             std::optional<py::array_t<std::uint32_t>> labels, double v) {
              return cloud_to_tuple(sparsify(cloud_from_arrays(xyz, labels), v));
          },
          py::arg("points"), py::arg("labels") = py::none(), py::arg("voxel") = 1.0);

    m.def("densify",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             std::optional<py::array_t<std::uint32_t>> labels, std::size_t k,
             double radius, std::size_t normal_k, std::uint64_t seed) {
              RngStream rng(seed);
              return cloud_to_tuple(
                  densify(cloud_from_arrays(xyz, labels), k, radius, normal_k, rng));
          },
          py::arg("points"), py::arg("labels") = py::none(), py::arg("k") = 1,
          py::arg("radius") = 0.1,
          py::arg("normal_k") = 16, py::arg("seed") = 0);

    m.def("visibility_filter",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             std::optional<py::array_t<std::uint32_t>> labels, double vx, double vy,
             double vz, double delta_alpha) {
              return cloud_to_tuple(visibility_filter(cloud_from_arrays(xyz, labels),
                                                      {vx, vy, vz}, delta_alpha));
          },
          py::arg("points"), py::arg("labels") = py::none(), py::arg("vx") = 0.0,
          py::arg("vy") = 0.0,
          py::arg("vz") = 0.0, py::arg("delta_alpha") = 0.01);

    m.def("estimate_mean_spacing",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             std::size_t sample_size) {
              return estimate_mean_spacing(cloud_from_arrays(xyz, std::nullopt),
                                           sample_size);
          },
          py::arg("points"), py::arg("sample_size") = 1000);

    m.def("knn",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             double qx, double qy, double qz, std::size_t k) {
              const NeighborIndex index(cloud_from_arrays(xyz, std::nullopt).points);
              std::vector<std::pair<std::size_t, double>> out;
              for (const Neighbor& nb : index.knn({qx, qy, qz}, k))
                  out.emplace_back(nb.id, nb.distance);
              return out;
          },
          py::arg("points"), py::arg("qx"), py::arg("qy"), py::arg("qz"), py::arg("k"));

    m.def("build_occupancy",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             double v) {
              const OccupancyGrid grid =
                  build_occupancy(cloud_from_arrays(xyz, std::nullopt), v);
              std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>> occ;
              for (const VoxelCoord& u : grid.occupied) occ.emplace_back(u.i, u.j, u.k);
              return py::make_tuple(
                  py::make_tuple(grid.domain.min.i, grid.domain.min.j, grid.domain.min.k),
                  py::make_tuple(grid.domain.max.i, grid.domain.max.j, grid.domain.max.k),
                  occ);
          },
          py::arg("points"), py::arg("voxel") = 1.0);

    m.def("miou",
          [](py::array_t<std::uint32_t> gt, py::array_t<std::uint32_t> pred,
             std::size_t classes, Label ignore_id) {
              auto g = gt.unchecked<1>();
              auto p = pred.unchecked<1>();
              std::vector<Label> gv(g.shape(0)), pv(p.shape(0));
              for (py::ssize_t i = 0; i < g.shape(0); ++i) gv[i] = g(i);
              for (py::ssize_t i = 0; i < p.shape(0); ++i) pv[i] = p(i);
              ConfusionMatrix cm(classes);
              accumulate(cm, gv, pv, ignore_id);
              return miou(cm);
          },
          py::arg("gt"), py::arg("pred"), py::arg("classes"),
          py::arg("ignore_id") = kDefaultIgnoreId);

    m.def("cga",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             std::optional<py::array_t<std::uint32_t>> labels, const std::string& mode,
             std::uint64_t seed) {
              CgaConfig cfg;
              cfg.mode = parse_cga_mode(mode);
              RngStream rng(seed);
              return cloud_to_tuple(cga(cloud_from_arrays(xyz, labels), cfg, rng));
          },
          py::arg("points"), py::arg("labels") = py::none(),
          py::arg("mode") = "random_pick", py::arg("seed") = 0);

    m.def("gcr_demo",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             std::optional<py::array_t<std::uint32_t>> labels, std::uint64_t seed,
             std::size_t steps, double lr, const std::string& mode) {
              RunConfig cfg;
              cfg.seed = seed;
              cfg.cga.mode = parse_cga_mode(mode);
              const GcrDemoResult r =
                  run_gcr_demo(cloud_from_arrays(xyz, labels), cfg, steps, lr);
              py::dict out;
              out["sem_s"] = r.sem_source;
              out["sem_a"] = r.sem_augmented;
              out["bce_s"] = r.bce_source;
              out["bce_a"] = r.bce_augmented;
              out["total"] = r.total;
              out["mean_loss_trace"] = r.mean_loss_trace;
              out["augmented_subset_of_source"] = r.augmented_subset_of_source;
              return out;
          },
          py::arg("points"), py::arg("labels") = py::none(), py::arg("seed") = 0,
          py::arg("steps") = 200, py::arg("lr") = 0.1,
          py::arg("mode") = "visibility_only");

    m.def("synthetic_scene",
          [](double extent, std::size_t approx_points, std::uint64_t seed) {
              return cloud_to_tuple(synthetic_scene(extent, approx_points, seed));
          },
          py::arg("extent") = 40.0, py::arg("approx_points") = 50000,
          py::arg("seed") = 0);

    m.def("read_cloud", [](const std::string& path) { return cloud_to_tuple(read_cloud(path)); },
          py::arg("path"));

    m.def("write_cloud",
          [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz,
             std::optional<py::array_t<std::uint32_t>> labels, const std::string& path) {
              write_cloud(cloud_from_arrays(xyz, labels), path);
          },
          py::arg("points"), py::arg("labels"), py::arg("path"));
}
