#include "mmtrack/tracking.hpp"

#include <algorithm>

namespace mmtrack {

int Track::hit_count() const { return static_cast<int>(std::count(hits.begin(), hits.end(), true)); }

bool Track::detected_last(int frames) const {
    if (static_cast<int>(hits.size()) < frames) return false;
    return std::all_of(hits.end() - frames, hits.end(), [](bool h) { return h; });
}

void Track::record(bool hit, int window) {
    hits.push_back(hit);
    while (static_cast<int>(hits.size()) > window) hits.pop_front();
}

void Track::push_cloud(BufferedCloud cloud, int capacity) {
    buffer.push_back(std::move(cloud));
    while (static_cast<int>(buffer.size()) > capacity) buffer.pop_front();
}

Track init_track(std::int64_t id, const ExtensionObservation& z, const NoiseConfig& cfg, std::int64_t k,
                 int classes) {
    Track t;
    t.id = id;
    t.born = k;
    t.x << z.mu_x, z.mu_y, 0.0, 0.0, z.length, z.width, z.orientation;
    Vector7d p0;
    p0 << cfg.sigma_range * cfg.sigma_range, cfg.sigma_range * cfg.sigma_range, 4.0, 4.0,
        cfg.sigma_obs_length * cfg.sigma_obs_length, cfg.sigma_obs_width * cfg.sigma_obs_width,
        cfg.sigma_obs_orientation * cfg.sigma_obs_orientation;
    t.P = p0.asDiagonal();
    t.belief = IdentityBelief::uniform(std::max(classes, 1));
    return t;
}

void predict(Track& track, const Matrix7d& f, const Matrix7d& q) { kf_predict(track.x, track.P, f, q); }

void update(Track& track, const ExtensionObservation& z, const Matrix57d& h, const Matrix5d& r) {
    kf_update(track.x, track.P, z.vector(), h, r);
}

}  // namespace mmtrack
