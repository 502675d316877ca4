#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "meshadv/defense.hpp"
#include "support.hpp"

using namespace meshadv;

namespace {

PointCloud cloud_of(std::vector<Vec3> points) {
    PointCloud c;
    c.points = std::move(points);
    return c;
}

}  // namespace

TEST_CASE("srs with keep == N is the identity") {
    Rng rng(1);
    PointCloud cloud;
    for (int i = 0; i < 20; ++i) {
        cloud.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    const PointCloud kept = srs(cloud, 20, 7);
    REQUIRE(kept.point_count() == 20);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) CHECK(kept.points[i] == cloud.points[i]);
}

TEST_CASE("srs keeps exactly the requested number of original points") {
    Rng rng(2);
    PointCloud cloud;
    for (int i = 0; i < 1024; ++i) {
        cloud.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    const PointCloud kept = srs(cloud, 512, 99);
    CHECK(kept.point_count() == 512);
    std::set<std::array<double, 3>> members;
    for (const Vec3& p : cloud.points) members.insert({p.x, p.y, p.z});
    for (const Vec3& p : kept.points) CHECK(members.count({p.x, p.y, p.z}) == 1);

    SUBCASE("deterministic given the seed") {
        const PointCloud again = srs(cloud, 512, 99);
        for (std::size_t i = 0; i < kept.points.size(); ++i) {
            CHECK(kept.points[i] == again.points[i]);
        }
    }
    SUBCASE("keep out of range is an error") {
        CHECK_THROWS_AS(srs(cloud, 2000, 1), std::invalid_argument);
        CHECK_THROWS_AS(srs(cloud, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("srs pair frequencies are uniform over 4 choose 2") {
    // 4 points keep 2: each of the 6 pairs should appear ~1/6 of the time.
    PointCloud cloud = cloud_of({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
    std::map<std::pair<int, int>, int> counts;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        const PointCloud kept = srs(cloud, 2, static_cast<std::uint64_t>(t));
        const int a = static_cast<int>(kept.points[0].x);
        const int b = static_cast<int>(kept.points[1].x);
        ++counts[{std::min(a, b), std::max(a, b)}];
    }
    REQUIRE(counts.size() == 6);
    const double expected = trials / 6.0;
    const double sigma = std::sqrt(trials * (1.0 / 6.0) * (5.0 / 6.0));
    for (const auto& [pair, count] : counts) {
        CHECK(std::abs(count - expected) <= 3.0 * sigma);
    }
}

TEST_CASE("sor removes a far outlier from a tight cluster") {
    Rng rng(3);
    PointCloud cloud;
    for (int i = 0; i < 100; ++i) {
        Vec3 p{rng.normal(), rng.normal(), rng.normal()};
        cloud.points.push_back(normalized(p) * rng.uniform(0.0, 1.0));
    }
    cloud.points.push_back({10.0, 0.0, 0.0});

    // Independent oracle: recompute the statistic by brute force and verify
    // the outlier is beyond mean + alpha * std before asserting removal.
    const int k = 2;
    const double alpha = 1.1;
    const std::vector<double> d = mean_knn_distances(cloud.points, k, Execution::Serial);
    double mean = 0.0;
    for (const double v : d) mean += v;
    mean /= static_cast<double>(d.size());
    double var = 0.0;
    for (const double v : d) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d.size());
    REQUIRE(d.back() > mean + alpha * std::sqrt(var));

    const PointCloud kept = sor(cloud, k, alpha);
    CHECK(kept.point_count() < cloud.point_count());
    for (const Vec3& p : kept.points) CHECK(norm(p - Vec3{10, 0, 0}) > 1e-12);
}

TEST_CASE("sor keeps a perfectly uniform grid intact") {
    PointCloud cloud;
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) {
            cloud.points.push_back({0.125 * i, 0.125 * j, 0.0});
        }
    }
    // Every point's two nearest neighbors sit at exactly one grid step, so the
    // statistic is constant, sigma = 0, and nothing exceeds mean + alpha*sigma.
    const PointCloud kept = sor(cloud, 2, 1.0);
    CHECK(kept.point_count() == cloud.point_count());
}

TEST_CASE("sor on an all-coincident cloud removes nothing") {
    PointCloud cloud;
    for (int i = 0; i < 10; ++i) cloud.points.push_back({1, 1, 1});
    const PointCloud kept = sor(cloud, 2, 1.1);
    CHECK(kept.point_count() == 10);
}

TEST_CASE("sor output is a subset and is permutation invariant as a set") {
    Rng rng(4);
    PointCloud cloud;
    for (int i = 0; i < 60; ++i) {
        cloud.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    cloud.points.push_back({5, 5, 5});
    const PointCloud kept = sor(cloud, 3, 1.0);
    std::set<std::array<double, 3>> input_set, kept_set;
    for (const Vec3& p : cloud.points) input_set.insert({p.x, p.y, p.z});
    for (const Vec3& p : kept.points) kept_set.insert({p.x, p.y, p.z});
    for (const auto& p : kept_set) CHECK(input_set.count(p) == 1);

    PointCloud reversed;
    reversed.points.assign(cloud.points.rbegin(), cloud.points.rend());
    const PointCloud kept_rev = sor(reversed, 3, 1.0);
    std::set<std::array<double, 3>> kept_rev_set;
    for (const Vec3& p : kept_rev.points) kept_rev_set.insert({p.x, p.y, p.z});
    CHECK(kept_set == kept_rev_set);
}

TEST_CASE("sor serial and parallel statistics agree bitwise") {
    Rng rng(5);
    std::vector<Vec3> points;
    for (int i = 0; i < 300; ++i) {
        points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    const auto a = mean_knn_distances(points, 2, Execution::Serial);
    const auto b = mean_knn_distances(points, 2, Execution::Parallel);
    CHECK(a == b);
}

TEST_CASE("evaluate_under_defense with no defense equals raw accuracy") {
    Rng rng(6);
    const ClassifierModel model = ClassifierModel::initialize(3, 17);
    std::vector<LabeledCloud> clouds;
    int correct = 0;
    for (int i = 0; i < 30; ++i) {
        LabeledCloud lc;
        lc.id = "cloud_" + std::to_string(i);
        lc.label = static_cast<int>(rng.uniform_index(3));
        for (int p = 0; p < 32; ++p) {
            lc.cloud.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
        }
        if (predict(model, lc.cloud.points) == lc.label) ++correct;
        clouds.push_back(std::move(lc));
    }
    DefenseConfig config;
    const auto rows = evaluate_under_defense(model, clouds, {DefenseKind::None}, config, "clean");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].accuracy == doctest::Approx(correct / 30.0).epsilon(1e-12));
    CHECK(rows[0].defense == "none");
    CHECK(rows[0].attack_source == "clean");
    CHECK(rows[0].sample_count == 30);
}
