#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmtrack/tracking.hpp"
#include "mmtrack/types.hpp"

namespace mmtrack {

/// One-to-one pairing of rows (detections) with columns (tracks).
struct Assignment {
    std::vector<std::pair<int, int>> matches;  // (row, column), ascending by row
    std::vector<int> unmatched_rows;
    std::vector<int> unmatched_cols;
};

/// Maximum-total-score assignment for a rectangular matrix of finite scores; the surplus side
/// stays unmatched. O(n^3) shortest augmenting paths.
Assignment hungarian(const Eigen::MatrixXd& score);

/// Score matrix of association probabilities, D x T (detections x tracks).
struct ScoreMatrix {
    Eigen::MatrixXd gamma;
    Eigen::MatrixXd likelihood;  // G_nt
    std::vector<std::string> diagnostics;
};

/// Cheap-JPDA scores on the kinematic position block. Tracks must already be predicted to the
/// current frame; the innovation is the observed centroid minus the predicted position and
/// S = P_pos + R'_k with R'_k from the predicted position.
ScoreMatrix cjpda_scores(std::span<const Track> tracks, std::span<const ExtensionObservation> observations,
                         double beta, const NoiseConfig& noise);

/// Normalizes likelihoods into scores: G_nt / (row sum + column sum - G_nt + beta).
Eigen::MatrixXd cjpda_normalize(const Eigen::MatrixXd& likelihood, double beta);

/// Hungarian on gamma; matches scoring below gamma_min are demoted to unmatched on both sides.
Assignment gate_and_associate(const ScoreMatrix& scores, double gamma_min);

/// m-out-of-n bookkeeping. Hits must already be recorded for the current frame.
struct LifecycleParams {
    int m = 10;
    int n = 30;
};

/// Confirmed tracks survive iff hit in >= m of the last n frames. Candidates are promoted once
/// they reach m hits, and dropped once more than n - m of their recorded frames are misses.
/// Promoted candidates are appended to `confirmed` in their candidate order.
void lifecycle(std::vector<Track>& confirmed, std::vector<Track>& candidates, const LifecycleParams& params);

/// While any two tracks are closer than eps, remove the one with the larger det(P) from the
/// closest such pair; exact det ties remove the larger id. Returns the removed ids.
std::vector<std::int64_t> proximity_prune(std::vector<Track>& tracks, double eps);

}  // namespace mmtrack
