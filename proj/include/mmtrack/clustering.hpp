#pragma once

#include <span>
#include <vector>

#include "mmtrack/types.hpp"

namespace mmtrack {

/// Member indices into the frame's point list, ascending.
struct Cluster {
    std::vector<int> members;
};

struct Clustering {
    std::vector<Cluster> clusters;  // ordered by smallest member index
    std::vector<int> noise;         // ascending
};

/// DBSCAN on the (x, y) components only.
///
/// A point is core when at least `min_points` points (itself included) lie within `eps`
/// (inclusive). Clusters are the connected components of core points under the eps relation.
/// A border point joins the cluster of its nearest core neighbor; exact distance ties go to
/// the lexicographically smallest (x, y) core point, so the partition does not depend on the
/// input order.
Clustering dbscan(std::span<const RadarPoint> points, double eps, int min_points);

inline Clustering dbscan(const Frame& frame, double eps, int min_points) {
    return dbscan(std::span<const RadarPoint>(frame.points), eps, min_points);
}

/// Smallest reported ellipse axis [m]; applied when the spread is degenerate.
inline constexpr double kExtensionFloor = 0.05;

/// Weighted centroid and covariance of the cluster's (x, y) points.
struct WeightedMoments {
    Vector2d mean = Vector2d::Zero();
    Matrix2d covariance = Matrix2d::Zero();
};

/// Powers min-max normalized to [0, 1], then scaled to sum to one. When all powers are equal
/// every point gets the same weight.
Eigen::VectorXd cluster_weights(std::span<const RadarPoint> points, const std::vector<int>& members);

WeightedMoments weighted_moments(std::span<const RadarPoint> points, const std::vector<int>& members);

/// Ellipse observation: full axes are 4 sqrt(eigenvalue) (twice a 2-sigma semi-axis),
/// floored at kExtensionFloor; orientation follows the dominant eigenvector, in [0, pi).
ExtensionObservation extension_observation(std::span<const RadarPoint> points, const Cluster& cluster);

inline ExtensionObservation extension_observation(const Frame& frame, const Cluster& cluster) {
    return extension_observation(std::span<const RadarPoint>(frame.points), cluster);
}

}  // namespace mmtrack
