#include "doctest.h"
#include "mmtrack/clustering.hpp"
#include "oracle_checks.hpp"

using namespace mmtrack;

TEST_SUITE("clustering") {

TEST_CASE("dbscan equals the naive reference") {
    CHECK(oracle::dbscan_failures(200, 300, 21) == 0);
}

TEST_CASE("dbscan partition does not depend on input order") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto pts = oracle::random_scene(rng, 150);
        const auto a = dbscan(std::span<const RadarPoint>(pts), 0.4, 10);
        std::vector<int> perm(pts.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<RadarPoint> shuffled;
        for (int i : perm) shuffled.push_back(pts[static_cast<std::size_t>(i)]);
        const auto b = dbscan(std::span<const RadarPoint>(shuffled), 0.4, 10);
        // Map both partitions back to original indices and compare as sets.
        std::set<std::set<int>> sa, sb;
        for (const auto& c : a.clusters) sa.insert({c.members.begin(), c.members.end()});
        for (const auto& c : b.clusters) {
            std::set<int> s;
            for (int m : c.members) s.insert(perm[static_cast<std::size_t>(m)]);
            sb.insert(s);
        }
        CHECK(sa == sb);
    }
}

TEST_CASE("dbscan inclusive radius and empty input") {
    std::vector<RadarPoint> pts{{0, 0, 0, 0, 1}, {0.4, 0, 0, 0, 1}};
    const auto c = dbscan(std::span<const RadarPoint>(pts), 0.4, 2);
    REQUIRE(c.clusters.size() == 1);
    CHECK(c.clusters[0].members == std::vector<int>{0, 1});
    CHECK(dbscan(std::span<const RadarPoint>(), 0.4, 2).clusters.empty());
    const auto lonely = dbscan(std::span<const RadarPoint>(pts), 0.4, 3);
    CHECK(lonely.noise == std::vector<int>{0, 1});
}

TEST_CASE("weighted moments equal direct summation") {
    CHECK(oracle::moments_max_error(300, 8) <= 1e-9);
}

TEST_CASE("extension of a known ellipse") {
    const double a = 0.2, b = 0.1, angle = kPi / 6;
    std::vector<RadarPoint> pts;
    for (auto [u, v] : {std::pair{a, 0.0}, {-a, 0.0}, {0.0, b}, {0.0, -b}}) {
        RadarPoint p;
        p.x = 1.0 + u * std::cos(angle) - v * std::sin(angle);
        p.y = 3.0 + u * std::sin(angle) + v * std::cos(angle);
        p.power = 5.0;
        pts.push_back(p);
    }
    const auto z = extension_observation(std::span<const RadarPoint>(pts), Cluster{{0, 1, 2, 3}});
    CHECK(z.mu_x == doctest::Approx(1.0));
    CHECK(z.mu_y == doctest::Approx(3.0));
    CHECK(z.length == doctest::Approx(4 * a / std::sqrt(2.0)));
    CHECK(z.width == doctest::Approx(4 * b / std::sqrt(2.0)));
    CHECK(z.orientation == doctest::Approx(angle));
}

TEST_CASE("extension invariants and floor") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const auto pts = oracle::random_scene(rng, 30);
        std::vector<int> m(pts.size());
        std::iota(m.begin(), m.end(), 0);
        const auto z = extension_observation(std::span<const RadarPoint>(pts), Cluster{m});
        CHECK(z.length >= z.width);
        CHECK(z.width >= kExtensionFloor);
        CHECK(z.orientation >= 0.0);
        CHECK(z.orientation < kPi);
    }
    std::vector<RadarPoint> same(5, RadarPoint{1, 2, 0, 0, 1});
    const auto z = extension_observation(std::span<const RadarPoint>(same), Cluster{{0, 1, 2, 3, 4}});
    CHECK(z.length == kExtensionFloor);
    CHECK(z.width == kExtensionFloor);
}

}
