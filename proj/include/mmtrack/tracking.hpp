#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "mmtrack/types.hpp"

namespace mmtrack {

/// Process and observation noise standard deviations.
struct NoiseConfig {
    double sigma_a = 8.0;                  // random acceleration [m/s^2]
    double sigma_length = 0.001;           // process, major axis [m]
    double sigma_width = 0.001;            // process, minor axis [m]
    double sigma_orientation = kPi / 24;   // process, orientation [rad]
    double sigma_range = 0.03;             // measured range [m]
    double sigma_azimuth = kPi / 24;       // measured azimuth [rad]
    double sigma_obs_length = 0.05;        // observed major axis [m]
    double sigma_obs_width = 0.05;         // observed minor axis [m]
    double sigma_obs_orientation = kPi / 6;  // observed orientation [rad]
};

/// State layout (x, y, vx, vy, length, width, orientation).
namespace state {
inline constexpr int kX = 0;
inline constexpr int kY = 1;
inline constexpr int kVx = 2;
inline constexpr int kVy = 3;
inline constexpr int kLength = 4;
inline constexpr int kWidth = 5;
inline constexpr int kOrientation = 6;
}  // namespace state

/// Constant-velocity kinematics, random-walk extension: blkdiag([[1, dt], [0, 1]] (x) I2, I3).
template <typename Scalar>
Matrix7<Scalar> build_F(Scalar dt) {
    if (!(dt > Scalar(0))) throw Error("build_F: dt must be positive");
    Matrix7<Scalar> f = Matrix7<Scalar>::Identity();
    f(0, 2) = dt;
    f(1, 3) = dt;
    return f;
}

/// blkdiag(sigma_a^2 g g^T (x) I2, diag(sigma_l^2, sigma_w^2, sigma_xi^2)), g = [dt^2/2, dt].
template <typename Scalar>
Matrix7<Scalar> build_Q(const NoiseConfig& cfg, Scalar dt) {
    if (!(dt > Scalar(0))) throw Error("build_Q: dt must be positive");
    const Scalar sa2 = Scalar(cfg.sigma_a * cfg.sigma_a);
    const Scalar g0 = dt * dt / Scalar(2);
    const Scalar g1 = dt;
    Matrix7<Scalar> q = Matrix7<Scalar>::Zero();
    for (int axis = 0; axis < 2; ++axis) {
        q(axis, axis) = sa2 * g0 * g0;
        q(axis, axis + 2) = q(axis + 2, axis) = sa2 * g0 * g1;
        q(axis + 2, axis + 2) = sa2 * g1 * g1;
    }
    q(4, 4) = Scalar(cfg.sigma_length * cfg.sigma_length);
    q(5, 5) = Scalar(cfg.sigma_width * cfg.sigma_width);
    q(6, 6) = Scalar(cfg.sigma_orientation * cfg.sigma_orientation);
    return q;
}

/// Observation matrix selecting (x, y, length, width, orientation).
template <typename Scalar>
Matrix57<Scalar> build_H() {
    Matrix57<Scalar> h = Matrix57<Scalar>::Zero();
    h(0, 0) = h(1, 1) = Scalar(1);
    h(2, 4) = h(3, 5) = h(4, 6) = Scalar(1);
    return h;
}

/// Jacobian of (range, azimuth) -> (x, y) with x = R sin(az), y = R cos(az).
template <typename Scalar>
Matrix2<Scalar> polar_jacobian(Scalar x, Scalar y) {
    const Scalar range = std::hypot(x, y);
    const Scalar az = std::atan2(x, y);
    Matrix2<Scalar> j;
    j << std::sin(az), range * std::cos(az), std::cos(az), -range * std::sin(az);
    return j;
}

/// Position-block covariance J diag(sigma_R^2, sigma_az^2) J^T at (x, y).
template <typename Scalar>
Matrix2<Scalar> position_covariance(Scalar x, Scalar y, const NoiseConfig& cfg) {
    if (std::hypot(x, y) < Scalar(0.01)) throw Error("measurement_covariance: range below 1 cm");
    const Matrix2<Scalar> j = polar_jacobian(x, y);
    const Vector2<Scalar> pol(Scalar(cfg.sigma_range * cfg.sigma_range), Scalar(cfg.sigma_azimuth * cfg.sigma_azimuth));
    return j * pol.asDiagonal() * j.transpose();
}

/// R_k evaluated at the predicted position of `predicted`.
template <typename Scalar>
Matrix5<Scalar> measurement_covariance(const Vector7<Scalar>& predicted, const NoiseConfig& cfg) {
    Matrix5<Scalar> r = Matrix5<Scalar>::Zero();
    r.template topLeftCorner<2, 2>() = position_covariance(predicted(0), predicted(1), cfg);
    r(2, 2) = Scalar(cfg.sigma_obs_length * cfg.sigma_obs_length);
    r(3, 3) = Scalar(cfg.sigma_obs_width * cfg.sigma_obs_width);
    r(4, 4) = Scalar(cfg.sigma_obs_orientation * cfg.sigma_obs_orientation);
    return r;
}

/// Kalman predict in place; covariance symmetrized afterwards.
template <typename Scalar>
void kf_predict(Vector7<Scalar>& x, Matrix7<Scalar>& p, const Matrix7<Scalar>& f, const Matrix7<Scalar>& q) {
    x = f * x;
    p = f * p * f.transpose() + q;
    p = (Scalar(0.5) * (p + p.transpose())).eval();
}

/// Restores length >= width >= 0 (swapping axes turns the ellipse by pi/2) and wraps orientation.
template <typename Scalar>
void normalize_extension(Vector7<Scalar>& x, Matrix7<Scalar>& p) {
    using namespace state;
    x(kLength) = std::max(x(kLength), Scalar(0));
    x(kWidth) = std::max(x(kWidth), Scalar(0));
    if (x(kWidth) > x(kLength)) {
        std::swap(x(kLength), x(kWidth));
        x(kOrientation) += Scalar(kPi / 2);
        Matrix7<Scalar> perm = Matrix7<Scalar>::Identity();
        perm(kLength, kLength) = perm(kWidth, kWidth) = Scalar(0);
        perm(kLength, kWidth) = perm(kWidth, kLength) = Scalar(1);
        p = (perm * p * perm.transpose()).eval();
    }
    x(kOrientation) = wrap_half_turn(x(kOrientation));
}

/// Kalman update with Joseph-form covariance. The orientation residual is wrapped to
/// (-pi/2, pi/2]. Throws Error when the innovation covariance is singular.
template <typename Scalar>
void kf_update(Vector7<Scalar>& x, Matrix7<Scalar>& p, const Vector5<Scalar>& z, const Matrix57<Scalar>& h,
               const Matrix5<Scalar>& r) {
    Vector5<Scalar> nu = z - h * x;
    nu(4) = wrap_half_turn_residual(nu(4));
    const Matrix5<Scalar> s = h * p * h.transpose() + r;
    const Eigen::LDLT<Matrix5<Scalar>> ldlt(s);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= std::numeric_limits<Scalar>::min())
        throw Error("kf_update: singular innovation covariance");
    // K = P H^T S^{-1}, computed as (S^{-1} H P)^T since S and P are symmetric.
    const Eigen::Matrix<Scalar, 7, 5> k = ldlt.solve(h * p).transpose();
    x += k * nu;
    const Matrix7<Scalar> a = Matrix7<Scalar>::Identity() - k * h;
    p = a * p * a.transpose() + k * r * k.transpose();
    p = (Scalar(0.5) * (p + p.transpose())).eval();
    normalize_extension(x, p);
}

/// Point cloud buffered for the classifier, with the per-frame feature vector cached once computed.
struct BufferedCloud {
    std::int64_t k = 0;
    std::vector<RadarPoint> points;
    std::optional<Eigen::VectorXf> features;
};

/// Stabilized identity scores of one track.
struct IdentityBelief {
    Eigen::VectorXd y;
    std::int64_t last_update = -1;

    static IdentityBelief uniform(int classes) {
        return {Eigen::VectorXd::Constant(classes, 1.0 / classes), -1};
    }
};

struct Track {
    std::int64_t id = 0;
    Vector7d x = Vector7d::Zero();
    Matrix7d P = Matrix7d::Identity();
    std::deque<BufferedCloud> buffer;  // newest at the back, at most K entries
    int identity = kUnknownIdentity;
    IdentityBelief belief;
    std::deque<bool> hits;  // newest at the back, at most n entries
    bool confirmed = false;
    std::int64_t born = 0;  // frame of creation

    int hit_count() const;
    bool detected_last(int frames) const;       // no miss within the most recent `frames`
    bool detected_now() const { return !hits.empty() && hits.back(); }
    Vector2d position() const { return x.head<2>(); }

    void record(bool hit, int window);
    void push_cloud(BufferedCloud cloud, int capacity);
};

/// New track from a first observation: zero velocity, P0 = diag(sR^2, sR^2, (2 m/s)^2, (2 m/s)^2,
/// s_l^2, s_w^2, s_xi^2).
Track init_track(std::int64_t id, const ExtensionObservation& z, const NoiseConfig& cfg, std::int64_t k,
                 int classes);

void predict(Track& track, const Matrix7d& f, const Matrix7d& q);
void update(Track& track, const ExtensionObservation& z, const Matrix57d& h, const Matrix5d& r);

}  // namespace mmtrack
