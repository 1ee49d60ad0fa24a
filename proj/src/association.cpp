#include "mmtrack/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mmtrack {

Assignment hungarian(const Eigen::MatrixXd& score) {
    const int rows = static_cast<int>(score.rows());
    const int cols = static_cast<int>(score.cols());
    Assignment out;
    if (rows == 0 || cols == 0) {
        out.unmatched_rows.resize(static_cast<std::size_t>(rows));
        std::iota(out.unmatched_rows.begin(), out.unmatched_rows.end(), 0);
        out.unmatched_cols.resize(static_cast<std::size_t>(cols));
        std::iota(out.unmatched_cols.begin(), out.unmatched_cols.end(), 0);
        return out;
    }
    if (!score.allFinite()) throw Error("hungarian: non-finite score");

    // Minimize cost = max - score on the transposed problem when rows > cols, so that the
    // working matrix always has n <= m.
    const bool transposed = rows > cols;
    const Eigen::MatrixXd s = transposed ? Eigen::MatrixXd(score.transpose()) : score;
    const int n = static_cast<int>(s.rows());
    const int m = static_cast<int>(s.cols());
    const double top = s.maxCoeff();
    auto cost = [&](int i, int j) { return top - s(i, j); };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
    std::vector<int> p(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_of_col(static_cast<std::size_t>(m), -1);
    for (int j = 1; j <= m; ++j)
        if (p[j] > 0) row_of_col[j - 1] = p[j] - 1;

    std::vector<char> row_used(static_cast<std::size_t>(rows), 0), col_used(static_cast<std::size_t>(cols), 0);
    for (int j = 0; j < m; ++j) {
        if (row_of_col[j] < 0) continue;
        const int r = transposed ? j : row_of_col[j];
        const int c = transposed ? row_of_col[j] : j;
        out.matches.emplace_back(r, c);
        row_used[r] = col_used[c] = 1;
    }
    std::sort(out.matches.begin(), out.matches.end());
    for (int r = 0; r < rows; ++r)
        if (!row_used[r]) out.unmatched_rows.push_back(r);
    for (int c = 0; c < cols; ++c)
        if (!col_used[c]) out.unmatched_cols.push_back(c);
    return out;
}

Eigen::MatrixXd cjpda_normalize(const Eigen::MatrixXd& g, double beta) {
    if (!(beta > 0)) throw Error("cjpda: beta must be positive");
    const Eigen::VectorXd row_sum = g.rowwise().sum();
    const Eigen::RowVectorXd col_sum = g.colwise().sum();
    Eigen::MatrixXd gamma(g.rows(), g.cols());
    for (Eigen::Index n = 0; n < g.rows(); ++n)
        for (Eigen::Index t = 0; t < g.cols(); ++t)
            gamma(n, t) = g(n, t) / (row_sum(n) + col_sum(t) - g(n, t) + beta);
    return gamma;
}

ScoreMatrix cjpda_scores(std::span<const Track> tracks, std::span<const ExtensionObservation> observations,
                         double beta, const NoiseConfig& noise) {
    const auto d = static_cast<Eigen::Index>(observations.size());
    const auto t = static_cast<Eigen::Index>(tracks.size());
    ScoreMatrix out;
    out.likelihood = Eigen::MatrixXd::Zero(d, t);
    for (Eigen::Index c = 0; c < t; ++c) {
        const Track& track = tracks[static_cast<std::size_t>(c)];
        Matrix2d s;
        try {
            s = track.P.topLeftCorner<2, 2>() + position_covariance(track.x(0), track.x(1), noise);
        } catch (const Error& e) {
            out.diagnostics.push_back("cjpda: track " + std::to_string(track.id) + ": " + e.what());
            continue;
        }
        const double det = s.determinant();
        if (!(det > 0) || !std::isfinite(det)) {
            out.diagnostics.push_back("cjpda: singular innovation covariance for track " + std::to_string(track.id));
            continue;
        }
        const Matrix2d s_inv = s.inverse();
        const double norm = 1.0 / std::sqrt(det);
        for (Eigen::Index r = 0; r < d; ++r) {
            const auto& z = observations[static_cast<std::size_t>(r)];
            const Vector2d nu(z.mu_x - track.x(0), z.mu_y - track.x(1));
            out.likelihood(r, c) = norm * std::exp(-0.5 * nu.dot(s_inv * nu));
        }
    }
    out.gamma = cjpda_normalize(out.likelihood, beta);
    return out;
}

Assignment gate_and_associate(const ScoreMatrix& scores, double gamma_min) {
    Assignment a = hungarian(scores.gamma);
    Assignment gated;
    gated.unmatched_rows = a.unmatched_rows;
    gated.unmatched_cols = a.unmatched_cols;
    for (const auto& [r, c] : a.matches) {
        if (scores.gamma(r, c) >= gamma_min) {
            gated.matches.emplace_back(r, c);
        } else {
            gated.unmatched_rows.push_back(r);
            gated.unmatched_cols.push_back(c);
        }
    }
    std::sort(gated.unmatched_rows.begin(), gated.unmatched_rows.end());
    std::sort(gated.unmatched_cols.begin(), gated.unmatched_cols.end());
    return gated;
}

void lifecycle(std::vector<Track>& confirmed, std::vector<Track>& candidates, const LifecycleParams& params) {
    if (params.m > params.n || params.m < 1) throw Error("lifecycle: need 1 <= m <= n");
    std::erase_if(confirmed, [&](const Track& t) { return t.hit_count() < params.m; });

    std::vector<Track> pending;
    for (auto& c : candidates) {
        const int misses = static_cast<int>(c.hits.size()) - c.hit_count();
        if (c.hit_count() >= params.m) {
            c.confirmed = true;
            confirmed.push_back(std::move(c));
        } else if (misses <= params.n - params.m) {
            pending.push_back(std::move(c));
        }
    }
    candidates = std::move(pending);
}

std::vector<std::int64_t> proximity_prune(std::vector<Track>& tracks, double eps) {
    if (!(eps > 0)) throw Error("proximity_prune: eps must be positive");
    std::vector<std::int64_t> removed;
    while (true) {
        int best_i = -1, best_j = -1;
        double best_d = eps;
        for (std::size_t i = 0; i < tracks.size(); ++i) {
            for (std::size_t j = i + 1; j < tracks.size(); ++j) {
                const double dist = (tracks[i].position() - tracks[j].position()).norm();
                if (dist < best_d) {
                    best_d = dist;
                    best_i = static_cast<int>(i);
                    best_j = static_cast<int>(j);
                }
            }
        }
        if (best_i < 0) break;
        const Track& a = tracks[static_cast<std::size_t>(best_i)];
        const Track& b = tracks[static_cast<std::size_t>(best_j)];
        const double da = a.P.determinant();
        const double db = b.P.determinant();
        int loser;
        if (da != db)
            loser = da > db ? best_i : best_j;
        else
            loser = a.id > b.id ? best_i : best_j;
        removed.push_back(tracks[static_cast<std::size_t>(loser)].id);
        tracks.erase(tracks.begin() + loser);
    }
    return removed;
}

}  // namespace mmtrack
