#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mmtrack/tracking.hpp"

namespace mmtrack::identify {

struct IdentifyParams {
    double rho = 0.99;     // weight of the previous belief in the moving average
    double gamma = 0.999;  // per-frame decay while a track is not classified
    double p_conf = 0.1;   // pairings scoring below this become UNKNOWN
    int window = 30;       // K; eligibility needs the last K/2 frames detected
};

/// One label per track, kUnknownIdentity allowed for any number of tracks.
struct IdentityAssignment {
    std::vector<int> labels;
};

/// Whether the classifier runs on this track: zero misses in the most recent K/2 frames and
/// at least K/2 buffered clouds (a respawned track starts with an empty buffer).
bool eligible(const Track& track, int window);

/// Moving average then renormalization when `output` is given; plain decay otherwise.
void smooth_belief(IdentityBelief& belief, const std::optional<Eigen::VectorXd>& output, const IdentifyParams& params,
                   std::int64_t k);

/// Hungarian on the T x Q score matrix; accepted pairings below p_conf are reported UNKNOWN.
IdentityAssignment assign_labels(const Eigen::MatrixXd& scores, double p_conf);

/// Smooths every track's belief with its classifier output (nullopt for tracks not classified
/// this frame), then assigns unique labels. Track identities are not modified.
IdentityAssignment joint_identify(std::span<Track> tracks, std::span<const std::optional<Eigen::VectorXd>> outputs,
                                  const IdentifyParams& params, std::int64_t k);

struct Respawn {
    std::int64_t old_id = 0;
    std::int64_t new_id = 0;
    int label = kUnknownIdentity;
};

/// Applies new labels. A track whose label changes between two known labels is replaced in
/// place by a fresh track (id from `next_id`) carrying state, covariance, belief, hit history
/// and the new label, with an empty cloud buffer. All other tracks just take the new label.
std::vector<Respawn> correct_tracks(std::vector<Track>& tracks, const IdentityAssignment& labels,
                                    std::int64_t& next_id, std::int64_t k);

}  // namespace mmtrack::identify
