#include <doctest.h>

#include <sstream>

#include "cvgc/occupancy.hpp"
#include "cvgc/pipeline.hpp"
#include "oracles.hpp"

using namespace cvgc;

namespace {

// scalar reimplementation of the head, kept free of the library loops
std::vector<double> head_oracle(const HeadParams& p, const VoxelFeatures& vf) {
    std::vector<double> out;
    for (const FeatureVec& f : vf.feats) {
        std::vector<double> hidden(p.hidden);
        for (std::size_t h = 0; h < p.hidden; ++h) {
            double a = p.b1[h];
            for (std::size_t d = 0; d < p.input_dim; ++d)
                a += p.w1[h * p.input_dim + d] * f[d];
            hidden[h] = std::max(0.0, a);
        }
        double z = p.b2;
        for (std::size_t h = 0; h < p.hidden; ++h) z += p.w2[h] * hidden[h];
        out.push_back(1.0 / (1.0 + std::exp(-z)));
    }
    return out;
}

VoxelFeatures random_features(const OccupancyGrid& grid, std::size_t dim, RngStream& rng) {
    VoxelFeatures vf;
    vf.coords = grid.domain_voxels();
    for (std::size_t t = 0; t < vf.coords.size(); ++t) {
        FeatureVec f(dim);
        for (double& x : f) x = 2.0 * rng.uniform() - 1.0;
        vf.feats.push_back(std::move(f));
    }
    return vf;
}

double loss_of(const HeadParams& p, const VoxelFeatures& vf, const OccupancyGrid& g) {
    return bce_loss(head_forward(p, vf), g);
}

}  // namespace

TEST_CASE("build_occupancy basics") {
    PointCloud single;
    single.points = {{0.1, 0.1, 0.1}};
    const OccupancyGrid g1 = build_occupancy(single, 1.0);
    CHECK(g1.domain.volume() == 1);
    CHECK(g1.is_occupied({0, 0, 0}));

    PointCloud two;
    two.points = {{0.5, 0.5, 0.5}, {3.5, 0.5, 0.5}};
    const OccupancyGrid g2 = build_occupancy(two, 1.0);
    CHECK(g2.domain.volume() == 4);
    CHECK(g2.occupied.size() == 2);

    CHECK_THROWS_AS(build_occupancy(PointCloud{}, 1.0), EmptyInput);

    const VoxelDomain tight{{0, 0, 0}, {0, 0, 0}};
    CHECK_THROWS_AS(build_occupancy(two, 1.0, tight), InvalidArgument);
}

TEST_CASE("build_occupancy matches the dedup-scan oracle") {
    RngStream rng(3);
    const PointCloud cloud = oracles::random_cloud(1000, 10.0, rng);
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);
    const auto expected = oracles::occupied_voxels(cloud.points, 1.0);
    CHECK(grid.occupied.size() == expected.size());
    for (const VoxelCoord& u : grid.occupied)
        CHECK(expected.count({u.i, u.j, u.k}) == 1);
}

TEST_CASE("occupancy is invariant under sparsification") {
    RngStream rng(5);
    for (int t = 0; t < 10; ++t) {
        const PointCloud cloud = oracles::random_cloud(500, 6.0, rng);
        const double v = 0.3 + rng.uniform();
        const OccupancyGrid a = build_occupancy(cloud, v);
        const OccupancyGrid b = build_occupancy(sparsify(cloud, v), v);
        CHECK(a.occupied == b.occupied);
        CHECK(a.domain.min == b.domain.min);
        CHECK(a.domain.max == b.domain.max);
    }
}

TEST_CASE("visibility-filtered occupancy is a subset of the source") {
    RngStream rng(7);
    const PointCloud cloud = oracles::random_cloud(2000, 15.0, rng);
    const Point3 vp{7.5, 7.5, 20.0};
    const PointCloud filtered = visibility_filter(cloud, vp, 0.01);
    const OccupancyGrid src = build_occupancy(cloud, 1.0);
    const OccupancyGrid aug = build_occupancy(filtered, 1.0, src.domain);
    for (const VoxelCoord& u : aug.occupied) CHECK(src.is_occupied(u));
}

TEST_CASE("aggregate_voxel_features simple weights") {
    PointCloud cloud;
    cloud.points = {{0.5, 0.5, -0.5}, {0.5, 0.5, 1.5}};  // equidistant from (.5,.5,.5)
    cloud.features = std::vector<FeatureVec>{{1.0, 0.0}, {0.0, 1.0}};
    OccupancyGrid grid;
    grid.v = 1.0;
    grid.domain = {{0, 0, 0}, {0, 0, 0}};
    grid.occupied = {{0, 0, 0}};
    const VoxelFeatures vf = aggregate_voxel_features(grid, cloud, 2, 1e-12);
    REQUIRE(vf.feats.size() == 1);
    CHECK(vf.feats[0][0] == doctest::Approx(0.5));
    CHECK(vf.feats[0][1] == doctest::Approx(0.5));
}

TEST_CASE("aggregate weights follow inverse distances") {
    PointCloud cloud;
    cloud.points = {{1.5, 0.5, 0.5}, {2.5, 0.5, 0.5}};  // at 1 m and 2 m from center
    cloud.features = std::vector<FeatureVec>{{1.0}, {0.0}};
    OccupancyGrid grid;
    grid.v = 1.0;
    grid.domain = {{0, 0, 0}, {0, 0, 0}};
    const VoxelFeatures vf = aggregate_voxel_features(grid, cloud, 2, 1e-8);
    CHECK(vf.feats[0][0] == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("aggregate matches brute-force recomputation, weights sum to 1") {
    RngStream rng(11);
    const std::size_t dim = 4;
    PointCloud cloud = oracles::random_cloud(300, 5.0, rng);
    cloud.features.emplace();
    for (std::size_t j = 0; j < cloud.size(); ++j) {
        FeatureVec f(dim);
        for (double& x : f) x = rng.uniform();
        cloud.features->push_back(std::move(f));
    }
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);
    const std::size_t k = 3;
    const double eps = 1e-8;
    const VoxelFeatures vf = aggregate_voxel_features(grid, cloud, k, eps);
    REQUIRE(vf.coords.size() == grid.domain.volume());

    for (std::size_t t = 0; t < vf.coords.size(); ++t) {
        const Point3 center = grid.voxel_center(vf.coords[t]);
        const auto nbrs = oracles::brute_knn(cloud.points, center, k);
        double wsum = 0.0;
        for (const auto& nb : nbrs) wsum += 1.0 / (nb.distance + eps);
        FeatureVec expect(dim, 0.0);
        double check_sum = 0.0;
        for (const auto& nb : nbrs) {
            const double w = (1.0 / (nb.distance + eps)) / wsum;
            check_sum += w;
            for (std::size_t d = 0; d < dim; ++d)
                expect[d] += w * (*cloud.features)[nb.id][d];
        }
        CHECK(std::abs(check_sum - 1.0) <= 1e-12);
        for (std::size_t d = 0; d < dim; ++d)
            CHECK(vf.feats[t][d] == doctest::Approx(expect[d]).epsilon(1e-12));
    }

    PointCloud no_features = oracles::random_cloud(10, 1.0, rng);
    CHECK_THROWS_AS(aggregate_voxel_features(grid, no_features, 3, 1e-8), MissingFeatures);
}

TEST_CASE("aggregate constant features interpolate exactly") {
    RngStream rng(13);
    PointCloud cloud = oracles::random_cloud(100, 3.0, rng);
    cloud.features = std::vector<FeatureVec>(cloud.size(), FeatureVec{2.5, -1.0});
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);
    const VoxelFeatures vf = aggregate_voxel_features(grid, cloud, 3, 1e-8);
    for (const FeatureVec& f : vf.feats) {
        CHECK(f[0] == doctest::Approx(2.5).epsilon(1e-12));
        CHECK(f[1] == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("head_forward fixed points") {
    RngStream rng(17);
    PointCloud cloud = oracles::random_cloud(50, 3.0, rng);
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);
    const VoxelFeatures vf = random_features(grid, 3, rng);

    HeadParams zero;
    zero.input_dim = 3;
    zero.hidden = 4;
    zero.w1.assign(12, 0.0);
    zero.b1.assign(4, 0.0);
    zero.w2.assign(4, 0.0);
    for (double p : head_forward(zero, vf)) CHECK(p == doctest::Approx(0.5));

    zero.b2 = 10.0;
    for (double p : head_forward(zero, vf))
        CHECK(p == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))));

    HeadParams random_params = HeadParams::init(3, 4, rng);
    const auto probs = head_forward(random_params, vf);
    const auto expect = head_oracle(random_params, vf);
    for (std::size_t t = 0; t < probs.size(); ++t) {
        CHECK(probs[t] > 0.0);
        CHECK(probs[t] < 1.0);
        CHECK(probs[t] == doctest::Approx(expect[t]).epsilon(1e-12));
    }
}

TEST_CASE("bce_loss analytic values") {
    PointCloud cloud;
    cloud.points = {{0.5, 0.5, 0.5}, {2.5, 0.5, 0.5}};
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);  // 3 voxels, 2 occupied
    const std::size_t n = grid.domain.volume();

    std::vector<double> perfect;
    for (const VoxelCoord& u : grid.domain_voxels())
        perfect.push_back(grid.is_occupied(u) ? 1.0 : 0.0);
    CHECK(bce_loss(perfect, grid) <= static_cast<double>(n) * -std::log(1.0 - 1e-7) + 1e-12);

    const std::vector<double> half(n, 0.5);
    CHECK(bce_loss(half, grid) == doctest::Approx(n * std::log(2.0)).epsilon(1e-12));

    CHECK_THROWS_AS(bce_loss(std::vector<double>(n + 1, 0.5), grid), InvalidArgument);

    // naive summation oracle on a random instance
    RngStream rng(19);
    std::vector<double> probs(n);
    for (double& p : probs) p = 0.01 + 0.98 * rng.uniform();
    double expected = 0.0;
    const auto voxels = grid.domain_voxels();
    for (std::size_t t = 0; t < n; ++t) {
        const double y = grid.is_occupied(voxels[t]) ? 1.0 : 0.0;
        expected -= y * std::log(probs[t]) + (1.0 - y) * std::log(1.0 - probs[t]);
    }
    CHECK(bce_loss(probs, grid) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("bce monotone toward the target") {
    PointCloud cloud;
    cloud.points = {{0.5, 0.5, 0.5}, {2.5, 0.5, 0.5}};
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);
    const auto voxels = grid.domain_voxels();
    std::vector<double> probs(voxels.size(), 0.5);
    double prev = bce_loss(probs, grid);
    for (int step = 0; step < 5; ++step) {
        for (std::size_t t = 0; t < voxels.size(); ++t) {
            const double y = grid.is_occupied(voxels[t]) ? 1.0 : 0.0;
            probs[t] += 0.08 * (y - probs[t]);
        }
        const double now = bce_loss(probs, grid);
        CHECK(now <= prev);
        prev = now;
    }
}

TEST_CASE("bce_grad matches central finite differences") {
    RngStream rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t dim = 1 + rng.pick(8);
        const std::size_t hidden = 1 + rng.pick(8);
        PointCloud cloud = oracles::random_cloud(20, 3.0, rng);
        const OccupancyGrid grid = build_occupancy(cloud, 1.0);
        VoxelFeatures vf = random_features(grid, dim, rng);
        HeadParams params = HeadParams::init(dim, hidden, rng);

        const HeadGrad g = bce_grad(params, vf, grid);
        const double h = 1e-5;
        auto fd = [&](double& slot) {
            const double keep = slot;
            slot = keep + h;
            const double up = loss_of(params, vf, grid);
            slot = keep - h;
            const double dn = loss_of(params, vf, grid);
            slot = keep;
            return (up - dn) / (2.0 * h);
        };
        auto close = [&](double analytic, double numeric) {
            const double scale = std::max({std::abs(analytic), std::abs(numeric), 1.0});
            CHECK(std::abs(analytic - numeric) / scale <= 1e-6);
        };
        for (std::size_t t = 0; t < params.w1.size(); ++t) close(g.w1[t], fd(params.w1[t]));
        for (std::size_t t = 0; t < params.b1.size(); ++t) close(g.b1[t], fd(params.b1[t]));
        for (std::size_t t = 0; t < params.w2.size(); ++t) close(g.w2[t], fd(params.w2[t]));
        close(g.b2, fd(params.b2));
    }
}

TEST_CASE("bce_grad vanishes at a saturated perfect fit") {
    PointCloud cloud;
    cloud.points = {{0.5, 0.5, 0.5}};
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);  // single occupied voxel
    VoxelFeatures vf;
    vf.coords = grid.domain_voxels();
    vf.feats = {FeatureVec{1.0}};
    HeadParams params;
    params.input_dim = 1;
    params.hidden = 1;
    params.w1 = {100.0};
    params.b1 = {0.0};
    params.w2 = {100.0};
    params.b2 = 0.0;  // p = sigmoid(1e4) ~ 1 == O
    const HeadGrad g = bce_grad(params, vf, grid);
    CHECK(std::abs(g.w1[0]) < 1e-9);
    CHECK(std::abs(g.w2[0]) < 1e-9);
    CHECK(std::abs(g.b2) < 1e-9);
}

TEST_CASE("feature doubling with halved first layer preserves the loss") {
    RngStream rng(29);
    PointCloud cloud = oracles::random_cloud(30, 3.0, rng);
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);
    const VoxelFeatures vf = random_features(grid, 3, rng);
    HeadParams params = HeadParams::init(3, 4, rng);

    VoxelFeatures doubled = vf;
    for (FeatureVec& f : doubled.feats)
        for (double& x : f) x *= 2.0;
    HeadParams halved = params;
    for (double& w : halved.w1) w *= 0.5;

    CHECK(loss_of(params, vf, grid) ==
          doctest::Approx(loss_of(halved, doubled, grid)).epsilon(1e-12));
    // chain rule: dL/dW1 on the halved/doubled instance is twice the original
    const HeadGrad g0 = bce_grad(params, vf, grid);
    const HeadGrad g1 = bce_grad(halved, doubled, grid);
    for (std::size_t t = 0; t < g0.w1.size(); ++t)
        CHECK(g1.w1[t] == doctest::Approx(2.0 * g0.w1[t]).epsilon(1e-9));
}

TEST_CASE("train_head basics") {
    RngStream rng(31);
    PointCloud cloud = oracles::random_cloud(60, 4.0, rng);
    const OccupancyGrid grid = build_occupancy(cloud, 1.0);
    // separable features: the occupancy bit itself
    VoxelFeatures vf;
    vf.coords = grid.domain_voxels();
    for (const VoxelCoord& u : vf.coords)
        vf.feats.push_back({grid.is_occupied(u) ? 1.0 : -1.0});
    HeadParams init = HeadParams::init(1, 4, rng);

    const TrainResult r = train_head(init, vf, grid, 200, 0.1);
    CHECK(r.mean_loss_trace.back() < 0.5 * r.mean_loss_trace.front());

    const TrainResult frozen = train_head(init, vf, grid, 5, 0.0);
    CHECK(frozen.params.w1 == init.w1);
    CHECK(frozen.params.b2 == init.b2);
    for (double l : frozen.mean_loss_trace)
        CHECK(l == doctest::Approx(frozen.mean_loss_trace[0]));

    const TrainResult again = train_head(init, vf, grid, 20, 0.05);
    const TrainResult again2 = train_head(init, vf, grid, 20, 0.05);
    CHECK(again.mean_loss_trace == again2.mean_loss_trace);
}

TEST_CASE("semantic_ce_loss") {
    std::vector<std::vector<double>> logits{{20.0, 0.0}};
    std::vector<Label> labels{0};
    CHECK(semantic_ce_loss(logits, labels, 255) < 1e-8);

    logits = {{0, 0, 0, 0, 0}};
    CHECK(semantic_ce_loss(logits, labels, 255) ==
          doctest::Approx(std::log(5.0)).epsilon(1e-12));

    // ignore everything -> 0
    labels = {255};
    CHECK(semantic_ce_loss(logits, labels, 255) == 0.0);

    labels = {9};
    CHECK_THROWS_AS(semantic_ce_loss(logits, labels, 255), InvalidArgument);

    // random batch vs per-point log-sum-exp oracle
    RngStream rng(37);
    std::vector<std::vector<double>> batch;
    std::vector<Label> batch_labels;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> row(4);
        for (double& z : row) z = 4.0 * rng.uniform() - 2.0;
        batch.push_back(row);
        batch_labels.push_back(static_cast<Label>(rng.pick(4)));
    }
    double expected = 0.0;
    for (int t = 0; t < 50; ++t) {
        double lse = 0.0;
        for (double z : batch[t]) lse += std::exp(z);
        expected += std::log(lse) - batch[t][batch_labels[t]];
    }
    expected /= 50.0;
    CHECK(semantic_ce_loss(batch, batch_labels, 255) ==
          doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("total_loss") {
    CHECK(total_loss(0, 0, 0, 0) == 0.0);
    CHECK(total_loss(1, 2, 3, 4) == 10.0);
    CHECK_THROWS_AS(total_loss(-1, 0, 0, 0), InvalidArgument);
    CHECK_THROWS_AS(total_loss(std::nan(""), 0, 0, 0), InvalidArgument);
}

TEST_CASE("handcrafted_features on a plane") {
    RngStream rng(41);
    PointCloud cloud;
    for (int i = 0; i < 30; ++i)
        for (int j = 0; j < 30; ++j)
            cloud.points.push_back({0.2 * i, 0.2 * j, 0.0});
    const NeighborIndex index(cloud.points);
    const PointCloud out = handcrafted_features(cloud, index, 16);
    REQUIRE(out.has_features());
    CHECK(out.feature_dim() == 3);
    for (const FeatureVec& f : *out.features) {
        CHECK(f[0] == 0.0);                                // z - z_min
        CHECK(f[2] == doctest::Approx(1.0).epsilon(1e-9)); // |n_z|
        CHECK(std::isfinite(f[1]));
    }
}

TEST_CASE("handcrafted_features height term") {
    PointCloud cloud;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            cloud.points.push_back({0.3 * i, 0.3 * j, 0.0});
    cloud.points.push_back({1.5, 1.5, 5.0});  // isolated point 5 m up
    const NeighborIndex index(cloud.points);
    const PointCloud out = handcrafted_features(cloud, index, 8);
    CHECK((*out.features).back()[0] == doctest::Approx(5.0));
}

TEST_CASE("occupancy serialization round trip is bit exact") {
    RngStream rng(43);
    const PointCloud cloud = oracles::random_cloud(500, 7.0, rng);
    const OccupancyGrid grid = build_occupancy(cloud, 0.77);
    const std::string text = serialize_occupancy(grid);
    std::istringstream in(text);
    const OccupancyGrid back = parse_occupancy(in);
    CHECK(back.v == grid.v);
    CHECK(back.domain.min == grid.domain.min);
    CHECK(back.domain.max == grid.domain.max);
    CHECK(back.occupied == grid.occupied);
    CHECK(serialize_occupancy(back) == text);
}

TEST_CASE("occupancy parser rejects malformed input") {
    std::istringstream empty("");
    CHECK_THROWS_AS(parse_occupancy(empty), ParseError);
    std::istringstream bad("BOGUS v=1 domain=0 0 0 1 1 1\n");
    CHECK_THROWS_AS(parse_occupancy(bad), ParseError);
    std::istringstream outside("OCC v=1 domain=0 0 0 1 1 1\n5 5 5\n");
    CHECK_THROWS_AS(parse_occupancy(outside), ParseError);
}
