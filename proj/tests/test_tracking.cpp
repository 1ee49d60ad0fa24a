#include <algorithm>
#include <random>

#include "doctest.h"
#include "mmtrack/tracking.hpp"
#include "nees.hpp"

using namespace mmtrack;

TEST_SUITE("tracking") {

TEST_CASE("transition and process noise structure") {
    const double dt = 0.1;
    const Matrix7d f = build_F(dt);
    CHECK(f(0, 2) == dt);
    CHECK(f(1, 3) == dt);
    CHECK((f - Matrix7d::Identity()).cwiseAbs().sum() == doctest::Approx(2 * dt));
    NoiseConfig cfg;
    const Matrix7d q = build_Q(cfg, dt);
    const double sa2 = cfg.sigma_a * cfg.sigma_a;
    CHECK(q(0, 0) == doctest::Approx(sa2 * std::pow(dt, 4) / 4));
    CHECK(q(0, 2) == doctest::Approx(sa2 * std::pow(dt, 3) / 2));
    CHECK(q(2, 2) == doctest::Approx(sa2 * dt * dt));
    CHECK(q(0, 1) == 0.0);
    CHECK(q(6, 6) == doctest::Approx(cfg.sigma_orientation * cfg.sigma_orientation));
    CHECK((q - q.transpose()).norm() == 0.0);
    CHECK_THROWS_AS(build_F(0.0), Error);
}

TEST_CASE("polar jacobian matches finite differences") {
    const double h = 1e-6;
    for (auto [x, y] : {std::pair{0.3, 2.0}, {-1.5, 4.0}, {2.0, 1.0}}) {
        const double r = std::hypot(x, y), az = std::atan2(x, y);
        auto cart = [](double rr, double aa) { return Vector2d(rr * std::sin(aa), rr * std::cos(aa)); };
        Matrix2d numeric;
        numeric.col(0) = (cart(r + h, az) - cart(r - h, az)) / (2 * h);
        numeric.col(1) = (cart(r, az + h) - cart(r, az - h)) / (2 * h);
        CHECK((polar_jacobian(x, y) - numeric).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("measurement covariance is symmetric positive definite") {
    NoiseConfig cfg;
    Vector7d x = Vector7d::Zero();
    x(0) = 1.0;
    x(1) = 3.0;
    const Matrix5d r = measurement_covariance(x, cfg);
    CHECK((r - r.transpose()).norm() < 1e-15);
    CHECK(r.llt().info() == Eigen::Success);
    // Radial variance along the line of sight.
    const Vector2d los = Vector2d(1.0, 3.0).normalized();
    CHECK(los.dot(r.topLeftCorner<2, 2>() * los) == doctest::Approx(cfg.sigma_range * cfg.sigma_range));
    x.head<2>().setZero();
    CHECK_THROWS_AS(measurement_covariance(x, cfg), Error);
}

TEST_CASE("update keeps the covariance symmetric and shrinking") {
    NoiseConfig cfg;
    ExtensionObservation z{0.5, 3.0, 0.5, 0.3, 0.2};
    Track t = init_track(0, z, cfg, 0, 4);
    const Matrix7d f = build_F(1.0 / 15), q = build_Q(cfg, 1.0 / 15);
    const Matrix57d h = build_H<double>();
    for (int i = 0; i < 50; ++i) {
        predict(t, f, q);
        const double before = t.P.trace();
        update(t, z, h, measurement_covariance(t.x, cfg));
        CHECK(t.P.trace() <= before);
        CHECK((t.P - t.P.transpose()).norm() == 0.0);
        CHECK(t.P.llt().info() == Eigen::Success);
    }
    CHECK(t.x(0) == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(t.x(1) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("long random runs keep the covariance valid and block diagonal") {
    NoiseConfig cfg;
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n(0.0, 1.0);
    Track t = init_track(0, ExtensionObservation{0.2, 3.0, 0.6, 0.3, 0.4}, cfg, 0, 4);
    const double dt = 1.0 / 14.92;
    const Matrix7d f = build_F(dt), q = build_Q(cfg, dt);
    const Matrix57d h = build_H<double>();
    double worst_asym = 0, worst_eig = 0, worst_cross = 0;
    for (int i = 0; i < 10000; ++i) {
        predict(t, f, q);
        // Keep the target in the room so the polar covariance stays defined.
        const double x = std::clamp(t.x(0) + 0.1 * n(rng), -3.0, 3.0);
        const double y = std::clamp(t.x(1) + 0.1 * n(rng), 1.0, 6.0);
        const ExtensionObservation z{x, y, 0.6 + 0.05 * n(rng), 0.3 + 0.05 * n(rng), 0.4 + 0.3 * n(rng)};
        if (i % 7 != 3) update(t, z, h, measurement_covariance(t.x, cfg));
        worst_asym = std::max(worst_asym, (t.P - t.P.transpose()).cwiseAbs().maxCoeff());
        worst_eig = std::min(worst_eig, Eigen::SelfAdjointEigenSolver<Matrix7d>(t.P).eigenvalues().minCoeff());
        worst_cross = std::max(worst_cross, t.P.block<4, 3>(0, 4).cwiseAbs().maxCoeff());
    }
    CHECK(worst_asym == 0.0);
    CHECK(worst_eig >= -1e-9);
    CHECK(worst_cross == 0.0);
}

TEST_CASE("orientation residual wraps through zero") {
    NoiseConfig cfg;
    Vector7d x;
    x << 0, 3, 0, 0, 0.5, 0.3, kPi - 0.05;
    Matrix7d p = Matrix7d::Identity() * 0.1;
    Vector5d z(0, 3, 0.5, 0.3, 0.05);
    kf_update(x, p, z, build_H<double>(), measurement_covariance(x, cfg));
    // The estimate moves towards pi (== 0), never back across the half turn.
    CHECK((x(6) > kPi - 0.05 || x(6) < 0.05));
}

TEST_CASE("axis swap keeps length >= width") {
    Vector7d x;
    x << 0, 0, 0, 0, 0.2, 0.4, 0.3;
    Matrix7d p = Matrix7d::Identity();
    p(4, 4) = 2.0;
    normalize_extension(x, p);
    CHECK(x(4) == 0.4);
    CHECK(x(5) == 0.2);
    CHECK(x(6) == doctest::Approx(0.3 + kPi / 2));
    CHECK(p(5, 5) == 2.0);
}

TEST_CASE("hit history and buffer are bounded") {
    Track t;
    for (int i = 0; i < 40; ++i) t.record(i % 2 == 0, 30);
    CHECK(t.hits.size() == 30);
    CHECK(t.hit_count() == 15);
    CHECK_FALSE(t.detected_last(1));
    for (int i = 0; i < 40; ++i) t.push_cloud({i, {}, std::nullopt}, 30);
    CHECK(t.buffer.size() == 30);
    CHECK(t.buffer.front().k == 10);
}

TEST_CASE("kinematic NEES stays in the chi-square band") {
    const auto r = oracle::kinematic_nees(100, 60, 17);
    CHECK(r.inside_fraction >= 0.9);
}

}
