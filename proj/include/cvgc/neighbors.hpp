#pragma once

#include <cstddef>
#include <vector>

#include "cvgc/core.hpp"

namespace cvgc {

struct Neighbor {
    std::size_t id = 0;
    double distance = 0.0;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

struct LocalFrame {
    Point3 u;
    Point3 v;
    Point3 n;
};

// Exact kd-tree over a fixed point set. Immutable after build; queries
// are safe from any number of concurrent readers.
class NeighborIndex {
public:
    explicit NeighborIndex(std::vector<Point3> points);

    std::size_t size() const { return points_.size(); }
    const std::vector<Point3>& points() const { return points_; }

    // min(k, N) exact nearest neighbors, sorted by (distance, id).
    std::vector<Neighbor> knn(const Point3& query, std::size_t k) const;

private:
    struct Node {
        std::int32_t axis = -1;  // -1 marks a leaf
        double split = 0.0;
        std::uint32_t left = 0;
        std::uint32_t right = 0;
        std::uint32_t begin = 0;  // leaf range into order_
        std::uint32_t end = 0;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Point3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::uint32_t root_ = 0;
};

NeighborIndex build_index(const std::vector<Point3>& points);

// Smallest-eigenvalue direction of the k-neighborhood covariance,
// sign-canonicalized so n.z >= 0 (then n.y >= 0, then n.x > 0).
// The point itself counts among its k neighbors.
Point3 estimate_normal(const NeighborIndex& index, std::size_t point_id, std::size_t k);

// Deterministic tangent basis: u from the canonical axis least aligned
// with n, v = n x u.
LocalFrame local_frame(const Point3& n);

}  // namespace cvgc
