#include "cvgc/neighbors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <queue>

namespace cvgc {

namespace {

constexpr std::uint32_t kLeafSize = 16;

double coord(const Point3& p, int axis) {
    switch (axis) {
        case 0: return p.x;
        case 1: return p.y;
        default: return p.z;
    }
}

}  // namespace

NeighborIndex::NeighborIndex(std::vector<Point3> points) : points_(std::move(points)) {
    if (points_.empty()) throw EmptyInput("build_index: empty point set");
    for (const Point3& p : points_)
        if (!p.finite()) throw InvalidArgument("build_index: non-finite point");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
    const std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    // split on the widest axis at the median
    Point3 lo = points_[order_[begin]], hi = lo;
    for (std::uint32_t t = begin; t < end; ++t) {
        const Point3& p = points_[order_[t]];
        lo.x = std::min(lo.x, p.x); hi.x = std::max(hi.x, p.x);
        lo.y = std::min(lo.y, p.y); hi.y = std::max(hi.y, p.y);
        lo.z = std::min(lo.z, p.z); hi.z = std::max(hi.z, p.z);
    }
    const Point3 ext = hi - lo;
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > coord(ext, axis)) axis = 2;

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         return coord(points_[a], axis) < coord(points_[b], axis);
                     });
    nodes_[id].axis = axis;
    nodes_[id].split = coord(points_[order_[mid]], axis);
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<Neighbor> NeighborIndex::knn(const Point3& query, std::size_t k) const {
    if (k < 1) throw InvalidArgument("knn: k must be >= 1");
    if (!query.finite()) throw InvalidArgument("knn: non-finite query");
    k = std::min(k, points_.size());

    // max-heap over (distance, id); worst candidate on top
    using Cand = std::pair<double, std::uint32_t>;
    std::priority_queue<Cand> heap;

    auto visit = [&](auto&& self, std::uint32_t node_id) -> void {
        const Node& node = nodes_[node_id];
        if (node.axis < 0) {
            for (std::uint32_t t = node.begin; t < node.end; ++t) {
                const std::uint32_t pid = order_[t];
                const double d = dist(points_[pid], query);
                if (heap.size() < k) {
                    heap.emplace(d, pid);
                } else if (d < heap.top().first ||
                           (d == heap.top().first && pid < heap.top().second)) {
                    heap.pop();
                    heap.emplace(d, pid);
                }
            }
            return;
        }
        const double delta = coord(query, node.axis) - node.split;
        const std::uint32_t near = delta < 0.0 ? node.left : node.right;
        const std::uint32_t far = delta < 0.0 ? node.right : node.left;
        self(self, near);
        if (heap.size() < k || std::abs(delta) <= heap.top().first) self(self, far);
    };
    visit(visit, root_);

    std::vector<Neighbor> result(heap.size());
    for (std::size_t t = result.size(); t-- > 0;) {
        result[t] = {heap.top().second, heap.top().first};
        heap.pop();
    }
    std::sort(result.begin(), result.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
    });
    return result;
}

NeighborIndex build_index(const std::vector<Point3>& points) {
    return NeighborIndex(points);
}

namespace {

// Cyclic Jacobi for a symmetric 3x3; plenty for covariance work.
void eigen_symmetric3(std::array<std::array<double, 3>, 3> a,
                      std::array<double, 3>& eigenvalues,
                      std::array<std::array<double, 3>, 3>& eigenvectors) {
    std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    for (int sweep = 0; sweep < 50; ++sweep) {
        double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
        if (off == 0.0) break;
        for (int p = 0; p < 2; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a[p][q]) == 0.0) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int r = 0; r < 3; ++r) {
                    const double arp = a[r][p], arq = a[r][q];
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for (int r = 0; r < 3; ++r) {
                    const double apr = a[p][r], aqr = a[q][r];
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
                for (int r = 0; r < 3; ++r) {
                    const double vrp = v[r][p], vrq = v[r][q];
                    v[r][p] = c * vrp - s * vrq;
                    v[r][q] = s * vrp + c * vrq;
                }
            }
        }
    }
    for (int i = 0; i < 3; ++i) eigenvalues[i] = a[i][i];
    eigenvectors = v;  // column i is the eigenvector for eigenvalues[i]
}

}  // namespace

Point3 estimate_normal(const NeighborIndex& index, std::size_t point_id, std::size_t k) {
    if (k < 3) throw InvalidArgument("estimate_normal: k must be >= 3");
    if (point_id >= index.size()) throw InvalidArgument("estimate_normal: bad point id");

    const auto nbrs = index.knn(index.points()[point_id], k);
    Point3 mean{};
    for (const Neighbor& nb : nbrs) mean = mean + index.points()[nb.id];
    mean = (1.0 / static_cast<double>(nbrs.size())) * mean;

    std::array<std::array<double, 3>, 3> cov{};
    for (const Neighbor& nb : nbrs) {
        const Point3 d = index.points()[nb.id] - mean;
        const double c[3] = {d.x, d.y, d.z};
        for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s) cov[r][s] += c[r] * c[s];
    }

    std::array<double, 3> ev;
    std::array<std::array<double, 3>, 3> vec;
    eigen_symmetric3(cov, ev, vec);

    int lo = 0, hi = 0;
    for (int i = 1; i < 3; ++i) {
        if (ev[i] < ev[lo]) lo = i;
        if (ev[i] > ev[hi]) hi = i;
    }
    int mid = 3 - lo - hi;
    if (lo == hi) mid = lo;  // all equal
    if (ev[mid] < 1e-12 * ev[hi] || ev[hi] <= 0.0)
        throw DegenerateGeometry("estimate_normal: degenerate neighborhood");

    Point3 n{vec[0][lo], vec[1][lo], vec[2][lo]};
    n = (1.0 / norm(n)) * n;
    if (n.z < 0.0 || (n.z == 0.0 && (n.y < 0.0 || (n.y == 0.0 && n.x < 0.0))))
        n = -1.0 * n;
    return n;
}

LocalFrame local_frame(const Point3& n) {
    if (std::abs(norm(n) - 1.0) > 1e-6)
        throw InvalidArgument("local_frame: n must be unit length");
    const std::array<Point3, 3> axes{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    int best = 0;
    double best_align = std::abs(dot(n, axes[0]));
    for (int i = 1; i < 3; ++i) {
        const double a = std::abs(dot(n, axes[i]));
        if (a < best_align) {
            best = i;
            best_align = a;
        }
    }
    Point3 u = axes[best] - dot(axes[best], n) * n;
    u = (1.0 / norm(u)) * u;
    return {u, cross(n, u), n};
}

}  // namespace cvgc
