#include "mmtrack/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace mmtrack {

namespace {

// Uniform grid with cell size eps; neighbors lie in the 3x3 block around a point's cell.
class NeighborGrid {
public:
    NeighborGrid(std::span<const RadarPoint> points, double eps) : points_(points), eps_(eps) {
        for (int i = 0; i < static_cast<int>(points.size()); ++i) cells_[key(cell_of(points[i]))].push_back(i);
    }

    std::vector<int> neighbors(int i) const {
        std::vector<int> out;
        const auto [cx, cy] = cell_of(points_[i]);
        const double eps2 = eps_ * eps_;
        for (long dx = -1; dx <= 1; ++dx) {
            for (long dy = -1; dy <= 1; ++dy) {
                auto it = cells_.find(key({cx + dx, cy + dy}));
                if (it == cells_.end()) continue;
                for (int j : it->second) {
                    const double ddx = points_[i].x - points_[j].x;
                    const double ddy = points_[i].y - points_[j].y;
                    if (ddx * ddx + ddy * ddy <= eps2) out.push_back(j);
                }
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::pair<long, long> cell_of(const RadarPoint& p) const {
        return {static_cast<long>(std::floor(p.x / eps_)), static_cast<long>(std::floor(p.y / eps_))};
    }
    static long long key(std::pair<long, long> c) {
        return (static_cast<long long>(c.first) << 32) ^ (static_cast<long long>(c.second) & 0xffffffffLL);
    }

    std::span<const RadarPoint> points_;
    double eps_;
    std::unordered_map<long long, std::vector<int>> cells_;
};

bool lex_less(const RadarPoint& a, const RadarPoint& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

}  // namespace

Clustering dbscan(std::span<const RadarPoint> points, double eps, int min_points) {
    if (!(eps > 0) || min_points < 1) throw Error("dbscan: need eps > 0 and min_points >= 1");
    const int n = static_cast<int>(points.size());
    Clustering result;
    if (n == 0) return result;

    const NeighborGrid grid(points, eps);
    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(n));
    std::vector<char> core(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        nbrs[i] = grid.neighbors(i);
        core[i] = static_cast<int>(nbrs[i].size()) >= min_points;
    }

    // Connected components over core points.
    std::vector<int> label(static_cast<std::size_t>(n), -1);
    int next = 0;
    std::vector<int> stack;
    for (int i = 0; i < n; ++i) {
        if (!core[i] || label[i] >= 0) continue;
        label[i] = next;
        stack.assign(1, i);
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            for (int q : nbrs[p]) {
                if (core[q] && label[q] < 0) {
                    label[q] = next;
                    stack.push_back(q);
                }
            }
        }
        ++next;
    }

    // Border points: nearest core neighbor wins.
    for (int i = 0; i < n; ++i) {
        if (core[i]) continue;
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int q : nbrs[i]) {
            if (!core[q]) continue;
            const double dx = points[i].x - points[q].x;
            const double dy = points[i].y - points[q].y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2 || (d2 == best_d2 && lex_less(points[q], points[best]))) {
                best = q;
                best_d2 = d2;
            }
        }
        if (best >= 0) label[i] = label[best];
    }

    result.clusters.resize(static_cast<std::size_t>(next));
    for (int i = 0; i < n; ++i) {
        if (label[i] < 0)
            result.noise.push_back(i);
        else
            result.clusters[static_cast<std::size_t>(label[i])].members.push_back(i);
    }
    // Components were discovered in ascending order of their first core point; reorder by
    // smallest member, which a border point may lower.
    std::sort(result.clusters.begin(), result.clusters.end(),
              [](const Cluster& a, const Cluster& b) { return a.members.front() < b.members.front(); });
    return result;
}

Eigen::VectorXd cluster_weights(std::span<const RadarPoint> points, const std::vector<int>& members) {
    if (members.empty()) throw Error("cluster_weights: empty cluster");
    const auto n = static_cast<Eigen::Index>(members.size());
    Eigen::VectorXd w(n);
    for (Eigen::Index r = 0; r < n; ++r) w(r) = points[static_cast<std::size_t>(members[r])].power;
    const double lo = w.minCoeff();
    const double hi = w.maxCoeff();
    if (hi - lo <= 0.0) return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    w = (w.array() - lo) / (hi - lo);
    return w / w.sum();
}

WeightedMoments weighted_moments(std::span<const RadarPoint> points, const std::vector<int>& members) {
    const Eigen::VectorXd w = cluster_weights(points, members);
    const auto n = static_cast<Eigen::Index>(members.size());
    Eigen::Matrix<double, 2, Eigen::Dynamic> xy(2, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& p = points[static_cast<std::size_t>(members[r])];
        xy.col(r) << p.x, p.y;
    }
    WeightedMoments m;
    m.mean = xy * w;
    const Eigen::Matrix<double, 2, Eigen::Dynamic> centred = xy.colwise() - m.mean;
    m.covariance = centred * w.asDiagonal() * centred.transpose();
    return m;
}

ExtensionObservation extension_observation(std::span<const RadarPoint> points, const Cluster& cluster) {
    const WeightedMoments m = weighted_moments(points, cluster.members);
    const double sxx = m.covariance(0, 0);
    const double syy = m.covariance(1, 1);
    const double sxy = m.covariance(0, 1);

    // Closed-form eigen-decomposition of a symmetric 2x2 matrix.
    const double half_trace = 0.5 * (sxx + syy);
    const double radius = std::hypot(0.5 * (sxx - syy), sxy);
    const double major = std::max(half_trace + radius, 0.0);
    const double minor = std::max(half_trace - radius, 0.0);

    ExtensionObservation obs;
    obs.mu_x = m.mean.x();
    obs.mu_y = m.mean.y();
    obs.length = std::max(4.0 * std::sqrt(major), kExtensionFloor);
    obs.width = std::max(4.0 * std::sqrt(minor), kExtensionFloor);
    const bool isotropic = radius <= 1e-12 * std::max(half_trace, 1e-300);
    obs.orientation = isotropic ? 0.0 : wrap_half_turn(0.5 * std::atan2(2.0 * sxy, sxx - syy));
    return obs;
}

}  // namespace mmtrack
