#include "cvgc/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace cvgc {

std::vector<VoxelCoord> OccupancyGrid::domain_voxels() const {
    std::vector<VoxelCoord> out;
    out.reserve(domain.volume());
    for (std::int64_t i = domain.min.i; i <= domain.max.i; ++i)
        for (std::int64_t j = domain.min.j; j <= domain.max.j; ++j)
            for (std::int64_t k = domain.min.k; k <= domain.max.k; ++k)
                out.push_back({i, j, k});
    return out;
}

OccupancyGrid build_occupancy(const PointCloud& cloud, double v,
                              const std::optional<VoxelDomain>& domain) {
    if (cloud.empty()) throw EmptyInput("build_occupancy: empty cloud");
    if (!(v > 0.0)) throw InvalidArgument("build_occupancy: voxel size must be > 0");

    OccupancyGrid grid;
    grid.v = v;
    for (const Point3& p : cloud.points) grid.occupied.insert(voxel_index(p, v));

    if (domain) {
        for (const VoxelCoord& u : grid.occupied)
            if (!domain->contains(u))
                throw InvalidArgument("build_occupancy: point outside the given domain");
        grid.domain = *domain;
    } else {
        auto it = grid.occupied.begin();
        grid.domain = {*it, *it};
        for (const VoxelCoord& u : grid.occupied) {
            grid.domain.min.i = std::min(grid.domain.min.i, u.i);
            grid.domain.min.j = std::min(grid.domain.min.j, u.j);
            grid.domain.min.k = std::min(grid.domain.min.k, u.k);
            grid.domain.max.i = std::max(grid.domain.max.i, u.i);
            grid.domain.max.j = std::max(grid.domain.max.j, u.j);
            grid.domain.max.k = std::max(grid.domain.max.k, u.k);
        }
    }
    return grid;
}

VoxelFeatures aggregate_voxel_features(const OccupancyGrid& grid, const PointCloud& cloud,
                                       std::size_t k, double eps) {
    if (!cloud.has_features()) throw MissingFeatures("aggregate: cloud has no features");
    if (k < 1) throw InvalidArgument("aggregate: k must be >= 1");
    if (!(eps > 0.0)) throw InvalidArgument("aggregate: eps must be > 0");
    cloud.validate();

    VoxelFeatures vf;
    vf.coords = grid.domain_voxels();
    vf.feats.resize(vf.coords.size());
    const std::size_t dim = cloud.feature_dim();
    const NeighborIndex index(cloud.points);

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t t = begin; t < end; ++t) {
            const auto nbrs = index.knn(grid.voxel_center(vf.coords[t]), k);
            double wsum = 0.0;
            for (const Neighbor& nb : nbrs) wsum += 1.0 / (nb.distance + eps);
            FeatureVec f(dim, 0.0);
            for (const Neighbor& nb : nbrs) {
                const double w = (1.0 / (nb.distance + eps)) / wsum;
                const FeatureVec& pf = (*cloud.features)[nb.id];
                for (std::size_t d = 0; d < dim; ++d) f[d] += w * pf[d];
            }
            vf.feats[t] = std::move(f);
        }
    };

    const std::size_t n = vf.coords.size();
    const unsigned threads = std::min<unsigned>(worker_count(),
                                                std::max<std::size_t>(1, n / 256));
    if (threads <= 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk;
            if (b >= n) break;
            pool.emplace_back(worker, b, std::min(n, b + chunk));
        }
        for (auto& th : pool) th.join();
    }
    return vf;
}

HeadParams HeadParams::init(std::size_t input_dim, std::size_t hidden, RngStream& rng) {
    HeadParams p;
    p.input_dim = input_dim;
    p.hidden = hidden;
    p.w1.resize(hidden * input_dim);
    p.b1.resize(hidden);
    p.w2.resize(hidden);
    auto u = [&] { return -0.1 + 0.2 * rng.uniform(); };
    for (double& w : p.w1) w = u();
    for (double& w : p.b1) w = u();
    for (double& w : p.w2) w = u();
    p.b2 = u();
    return p;
}

namespace {

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                    : std::exp(x) / (1.0 + std::exp(x));
}

constexpr double kProbClamp = 1e-7;

double clamp_prob(double p) {
    return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

std::vector<double> head_forward(const HeadParams& params, const VoxelFeatures& vf) {
    if (vf.dim() != params.input_dim)
        throw InvalidArgument("head_forward: feature dimension mismatch");
    std::vector<double> probs(vf.feats.size());
    for (std::size_t t = 0; t < vf.feats.size(); ++t) {
        const FeatureVec& f = vf.feats[t];
        double z = params.b2;
        for (std::size_t h = 0; h < params.hidden; ++h) {
            double a = params.b1[h];
            for (std::size_t d = 0; d < params.input_dim; ++d)
                a += params.w1[h * params.input_dim + d] * f[d];
            if (a > 0.0) z += params.w2[h] * a;
        }
        probs[t] = sigmoid(z);
    }
    return probs;
}

double bce_loss(const std::vector<double>& probs, const OccupancyGrid& grid) {
    const auto voxels = grid.domain_voxels();
    if (probs.size() != voxels.size())
        throw InvalidArgument("bce_loss: probability count does not match the domain");
    double loss = 0.0;
    for (std::size_t t = 0; t < voxels.size(); ++t) {
        const double p = clamp_prob(probs[t]);
        loss -= grid.is_occupied(voxels[t]) ? std::log(p) : std::log(1.0 - p);
    }
    return loss;
}

HeadGrad bce_grad(const HeadParams& params, const VoxelFeatures& vf,
                  const OccupancyGrid& grid) {
    if (vf.dim() != params.input_dim)
        throw InvalidArgument("bce_grad: feature dimension mismatch");
    if (vf.coords.size() != grid.domain.volume())
        throw InvalidArgument("bce_grad: features do not cover the domain");

    HeadGrad g;
    g.w1.assign(params.w1.size(), 0.0);
    g.b1.assign(params.b1.size(), 0.0);
    g.w2.assign(params.w2.size(), 0.0);

    std::vector<double> act(params.hidden);
    for (std::size_t t = 0; t < vf.feats.size(); ++t) {
        const FeatureVec& f = vf.feats[t];
        double z = params.b2;
        for (std::size_t h = 0; h < params.hidden; ++h) {
            double a = params.b1[h];
            for (std::size_t d = 0; d < params.input_dim; ++d)
                a += params.w1[h * params.input_dim + d] * f[d];
            act[h] = a > 0.0 ? a : 0.0;
            z += params.w2[h] * act[h];
        }
        const double p = sigmoid(z);
        // clamped probabilities have zero gradient at the rails
        if (p <= kProbClamp || p >= 1.0 - kProbClamp) continue;
        const double y = grid.is_occupied(vf.coords[t]) ? 1.0 : 0.0;
        const double dz = p - y;  // dL/dz for BCE through sigmoid
        g.b2 += dz;
        for (std::size_t h = 0; h < params.hidden; ++h) {
            g.w2[h] += dz * act[h];
            if (act[h] > 0.0) {
                const double da = dz * params.w2[h];
                g.b1[h] += da;
                for (std::size_t d = 0; d < params.input_dim; ++d)
                    g.w1[h * params.input_dim + d] += da * f[d];
            }
        }
    }
    return g;
}

TrainResult train_head_multi(const HeadParams& initial,
                             const std::vector<const VoxelFeatures*>& views,
                             const std::vector<const OccupancyGrid*>& grids,
                             std::size_t steps, double lr) {
    if (steps < 1) throw InvalidArgument("train_head: steps must be >= 1");
    if (!(lr >= 0.0)) throw InvalidArgument("train_head: lr must be >= 0");
    if (views.empty() || views.size() != grids.size())
        throw InvalidArgument("train_head: mismatched views and grids");

    TrainResult result;
    result.params = initial;
    result.mean_loss_trace.reserve(steps);
    std::size_t total_voxels = 0;
    for (const OccupancyGrid* g : grids) total_voxels += g->domain.volume();

    for (std::size_t step = 0; step < steps; ++step) {
        double loss = 0.0;
        HeadGrad total;
        total.w1.assign(result.params.w1.size(), 0.0);
        total.b1.assign(result.params.b1.size(), 0.0);
        total.w2.assign(result.params.w2.size(), 0.0);
        for (std::size_t v = 0; v < views.size(); ++v) {
            loss += bce_loss(head_forward(result.params, *views[v]), *grids[v]);
            const HeadGrad g = bce_grad(result.params, *views[v], *grids[v]);
            for (std::size_t t = 0; t < g.w1.size(); ++t) total.w1[t] += g.w1[t];
            for (std::size_t t = 0; t < g.b1.size(); ++t) total.b1[t] += g.b1[t];
            for (std::size_t t = 0; t < g.w2.size(); ++t) total.w2[t] += g.w2[t];
            total.b2 += g.b2;
        }
        if (!std::isfinite(loss))
            throw Error("train_head: non-finite loss at step " + std::to_string(step));
        result.mean_loss_trace.push_back(loss / static_cast<double>(total_voxels));
        // step on the mean-loss gradient so lr is independent of domain size
        const double step_scale = lr / static_cast<double>(total_voxels);
        for (std::size_t t = 0; t < total.w1.size(); ++t)
            result.params.w1[t] -= step_scale * total.w1[t];
        for (std::size_t t = 0; t < total.b1.size(); ++t)
            result.params.b1[t] -= step_scale * total.b1[t];
        for (std::size_t t = 0; t < total.w2.size(); ++t)
            result.params.w2[t] -= step_scale * total.w2[t];
        result.params.b2 -= step_scale * total.b2;
    }
    return result;
}

TrainResult train_head(const HeadParams& initial, const VoxelFeatures& vf,
                       const OccupancyGrid& grid, std::size_t steps, double lr) {
    return train_head_multi(initial, {&vf}, {&grid}, steps, lr);
}

double semantic_ce_loss(const std::vector<std::vector<double>>& logits,
                        const std::vector<Label>& labels, Label ignore_id) {
    if (logits.size() != labels.size())
        throw InvalidArgument("semantic_ce_loss: length mismatch");
    double total = 0.0;
    std::size_t scored = 0;
    for (std::size_t t = 0; t < logits.size(); ++t) {
        if (labels[t] == ignore_id) continue;
        const std::vector<double>& l = logits[t];
        if (l.size() < 2) throw InvalidArgument("semantic_ce_loss: need >= 2 classes");
        if (labels[t] >= l.size())
            throw InvalidArgument("semantic_ce_loss: label out of range");
        const double zmax = *std::max_element(l.begin(), l.end());
        double lse = 0.0;
        for (double z : l) lse += std::exp(z - zmax);
        total += std::log(lse) + zmax - l[labels[t]];
        ++scored;
    }
    return scored == 0 ? 0.0 : total / static_cast<double>(scored);
}

double total_loss(double sem_s, double sem_a, double bce_s, double bce_a) {
    for (double x : {sem_s, sem_a, bce_s, bce_a})
        if (!std::isfinite(x) || x < 0.0)
            throw InvalidArgument("total_loss: components must be finite and >= 0");
    return ((sem_s + sem_a) + bce_s) + bce_a;
}

PointCloud handcrafted_features(const PointCloud& cloud, const NeighborIndex& index,
                                std::size_t normal_k) {
    if (cloud.size() < normal_k)
        throw InvalidArgument("handcrafted_features: cloud smaller than normal_k");

    double z_min = cloud.points[0].z;
    for (const Point3& p : cloud.points) z_min = std::min(z_min, p.z);

    PointCloud out = cloud;
    out.features.emplace(cloud.size());

    auto count_within_1m = [&](const Point3& q) {
        std::size_t k = 16;
        for (;;) {
            const auto nbrs = index.knn(q, k);
            if (nbrs.back().distance > 1.0 || nbrs.size() == index.size()) {
                std::size_t c = 0;
                for (const Neighbor& nb : nbrs)
                    if (nb.distance <= 1.0) ++c;
                return c;
            }
            k *= 2;
        }
    };

    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            double nz = 0.0;
            try {
                nz = std::abs(estimate_normal(index, j, normal_k).z);
            } catch (const DegenerateGeometry&) {
                nz = 0.0;
            }
            (*out.features)[j] = {cloud.points[j].z - z_min,
                                  std::log(1.0 + static_cast<double>(
                                                     count_within_1m(cloud.points[j]))),
                                  nz};
        }
    };

    const std::size_t n = cloud.size();
    const unsigned threads = std::min<unsigned>(worker_count(),
                                                std::max<std::size_t>(1, n / 1024));
    if (threads <= 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = t * chunk;
            if (b >= n) break;
            pool.emplace_back(worker, b, std::min(n, b + chunk));
        }
        for (auto& th : pool) th.join();
    }
    return out;
}

std::string serialize_occupancy(const OccupancyGrid& grid) {
    std::ostringstream out;
    char vbuf[64];
    std::snprintf(vbuf, sizeof(vbuf), "%.17g", grid.v);
    out << "OCC v=" << vbuf << " domain=" << grid.domain.min.i << ' '
        << grid.domain.min.j << ' ' << grid.domain.min.k << ' ' << grid.domain.max.i
        << ' ' << grid.domain.max.j << ' ' << grid.domain.max.k << '\n';
    for (const VoxelCoord& u : grid.occupied)  // std::set is already lexicographic
        out << u.i << ' ' << u.j << ' ' << u.k << '\n';
    return out.str();
}

OccupancyGrid parse_occupancy(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("occupancy: empty input");
    OccupancyGrid grid;
    {
        std::istringstream h(line);
        std::string magic, vtok, dtok;
        h >> magic >> vtok;
        if (magic != "OCC" || vtok.rfind("v=", 0) != 0)
            throw ParseError("occupancy: bad header: " + line);
        grid.v = std::stod(vtok.substr(2));
        h >> dtok;
        if (dtok.rfind("domain=", 0) != 0)
            throw ParseError("occupancy: bad header: " + line);
        std::istringstream d(dtok.substr(7));
        d >> grid.domain.min.i;
        h >> grid.domain.min.j >> grid.domain.min.k >> grid.domain.max.i >>
            grid.domain.max.j >> grid.domain.max.k;
        if (h.fail()) throw ParseError("occupancy: bad header: " + line);
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        VoxelCoord u;
        ls >> u.i >> u.j >> u.k;
        if (ls.fail())
            throw ParseError("occupancy: bad voxel at line " + std::to_string(line_no));
        if (!grid.domain.contains(u))
            throw ParseError("occupancy: voxel outside domain at line " +
                             std::to_string(line_no));
        grid.occupied.insert(u);
    }
    return grid;
}

void write_occupancy(const OccupancyGrid& grid, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << serialize_occupancy(grid);
    if (!out) throw IoError("write failed: " + path);
}

OccupancyGrid read_occupancy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    return parse_occupancy(in);
}

}  // namespace cvgc
