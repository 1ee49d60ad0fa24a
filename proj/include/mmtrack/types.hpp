#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mmtrack {

/// Thrown on contract violations and malformed inputs throughout the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector5 = Eigen::Matrix<Scalar, 5, 1>;
template <typename Scalar>
using Vector7 = Eigen::Matrix<Scalar, 7, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Matrix5 = Eigen::Matrix<Scalar, 5, 5>;
template <typename Scalar>
using Matrix7 = Eigen::Matrix<Scalar, 7, 7>;
template <typename Scalar>
using Matrix57 = Eigen::Matrix<Scalar, 5, 7>;

using Vector2d = Vector2<double>;
using Vector5d = Vector5<double>;
using Vector7d = Vector7<double>;
using Matrix2d = Matrix2<double>;
using Matrix5d = Matrix5<double>;
using Matrix7d = Matrix7<double>;
using Matrix57d = Matrix57<double>;

/// One detected reflector: Cartesian position, radial velocity, received power.
struct RadarPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double v = 0.0;
    double power = 0.0;

    friend bool operator==(const RadarPoint&, const RadarPoint&) = default;
};

/// All points detected at time step k. An empty point list is legal (total blockage).
struct Frame {
    std::int64_t k = 0;
    std::vector<RadarPoint> points;
};

/// Position and ellipse extension measured from one cluster.
/// Invariants: length >= width >= 0, orientation in [0, pi).
struct ExtensionObservation {
    double mu_x = 0.0;
    double mu_y = 0.0;
    double length = 0.0;
    double width = 0.0;
    double orientation = 0.0;

    Vector5d vector() const { return {mu_x, mu_y, length, width, orientation}; }
};

/// Track identity label; values >= 0 index the Q known subjects.
inline constexpr int kUnknownIdentity = -1;

/// Wraps an angle to [0, pi).
template <typename Scalar>
Scalar wrap_half_turn(Scalar angle) {
    const Scalar pi = Scalar(kPi);
    Scalar r = std::fmod(angle, pi);
    if (r < Scalar(0)) r += pi;
    if (r >= pi) r -= pi;
    return r;
}

/// Wraps an angle difference to (-pi/2, pi/2], the residual range of a period-pi quantity.
template <typename Scalar>
Scalar wrap_half_turn_residual(Scalar angle) {
    const Scalar pi = Scalar(kPi);
    Scalar r = std::fmod(angle, pi);
    if (r <= -pi / 2) r += pi;
    if (r > pi / 2) r -= pi;
    return r;
}

}  // namespace mmtrack
