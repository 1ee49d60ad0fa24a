#include "mmtrack/identify.hpp"

#include "mmtrack/association.hpp"

namespace mmtrack::identify {

bool eligible(const Track& track, int window) {
    const int half = window / 2;
    return track.detected_last(half) && static_cast<int>(track.buffer.size()) >= half;
}

void smooth_belief(IdentityBelief& belief, const std::optional<Eigen::VectorXd>& output, const IdentifyParams& params,
                   std::int64_t k) {
    if (!(params.rho > 0 && params.rho < 1) || !(params.gamma > 0 && params.gamma < 1))
        throw Error("identify: rho and gamma must lie in (0, 1)");
    if (output) {
        if (output->size() != belief.y.size()) throw Error("identify: classifier output has the wrong length");
        belief.y = (1 - params.rho) * *output + params.rho * belief.y;
        const double sum = belief.y.sum();
        if (sum > 0) belief.y /= sum;
        belief.last_update = k;
    } else {
        belief.y *= params.gamma;
    }
}

IdentityAssignment assign_labels(const Eigen::MatrixXd& scores, double p_conf) {
    IdentityAssignment out;
    out.labels.assign(static_cast<std::size_t>(scores.rows()), kUnknownIdentity);
    const Assignment a = hungarian(scores);
    for (const auto& [track, label] : a.matches)
        if (scores(track, label) >= p_conf) out.labels[static_cast<std::size_t>(track)] = label;
    return out;
}

IdentityAssignment joint_identify(std::span<Track> tracks, std::span<const std::optional<Eigen::VectorXd>> outputs,
                                  const IdentifyParams& params, std::int64_t k) {
    if (outputs.size() != tracks.size()) throw Error("identify: one classifier slot per track required");
    if (tracks.empty()) return {};
    const auto q = tracks.front().belief.y.size();
    Eigen::MatrixXd y(static_cast<Eigen::Index>(tracks.size()), q);
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        smooth_belief(tracks[t].belief, outputs[t], params, k);
        if (tracks[t].belief.y.size() != q) throw Error("identify: tracks disagree on the class count");
        y.row(static_cast<Eigen::Index>(t)) = tracks[t].belief.y.transpose();
    }
    return assign_labels(y, params.p_conf);
}

std::vector<Respawn> correct_tracks(std::vector<Track>& tracks, const IdentityAssignment& labels,
                                    std::int64_t& next_id, std::int64_t k) {
    if (labels.labels.size() != tracks.size()) throw Error("correct_tracks: one label per track required");
    std::vector<Respawn> respawns;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
        Track& old = tracks[t];
        const int next = labels.labels[t];
        if (old.identity != kUnknownIdentity && next != kUnknownIdentity && next != old.identity) {
            Track fresh;
            fresh.id = next_id++;
            fresh.x = old.x;
            fresh.P = old.P;
            fresh.identity = next;
            fresh.belief = old.belief;
            fresh.hits = old.hits;
            fresh.confirmed = old.confirmed;
            fresh.born = k;
            respawns.push_back({old.id, fresh.id, next});
            old = std::move(fresh);
        } else {
            old.identity = next;
        }
    }
    return respawns;
}

}  // namespace mmtrack::identify
