#include "mmtrack/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "mmtrack/clustering.hpp"

namespace mmtrack::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point from) {
    return std::chrono::duration<double, std::milli>(Clock::now() - from).count();
}

std::vector<RadarPoint> members_of(const Frame& frame, const Cluster& c) {
    std::vector<RadarPoint> pts;
    pts.reserve(c.members.size());
    for (int m : c.members) pts.push_back(frame.points[static_cast<std::size_t>(m)]);
    return pts;
}

}  // namespace

void PipelineConfig::validate() const {
    if (!(eps > 0)) throw Error("config: eps must be positive");
    if (min_points < 1) throw Error("config: min_points must be at least 1");
    if (!(beta > 0)) throw Error("config: beta must be positive");
    if (!(gamma_min >= 0)) throw Error("config: gamma_min must be non-negative");
    if (lifecycle.m < 1 || lifecycle.m > lifecycle.n) throw Error("config: need 1 <= m <= n");
    if (window < 2 || window % 2 != 0) throw Error("config: K must be even and at least 2");
    if (n_max < 1) throw Error("config: n_max must be positive");
    if (!(identify.rho > 0 && identify.rho < 1)) throw Error("config: rho must lie in (0, 1)");
    if (!(identify.gamma > 0 && identify.gamma < 1)) throw Error("config: gamma must lie in (0, 1)");
    if (!(identify.p_conf >= 0 && identify.p_conf <= 1)) throw Error("config: p_conf must lie in [0, 1]");
    if (identify.window != window) throw Error("config: identification window must equal K");
    if (!(dt > 0)) throw Error("config: dt must be positive");
    if (classes < 1) throw Error("config: classes must be positive");
}

Pipeline::Pipeline(const PipelineConfig& config, const classifier::Tcpcn<float>* model)
    : config_(config), model_(model), h_(build_H<double>()) {
    config_.identify.window = config_.window;
    config_.validate();
    if (!config_.classify) model_ = nullptr;
    if (model_ != nullptr && model_->classes() != config_.classes)
        throw Error("model has Q = " + std::to_string(model_->classes()) + " classes but config has classes = " +
                    std::to_string(config_.classes));
}

void Pipeline::track(const Frame& frame) {
    const double dt = config_.dt * static_cast<double>(last_k_ ? frame.k - *last_k_ : 1);
    const Matrix7d f = build_F<double>(dt);
    const Matrix7d q = build_Q<double>(config_.noise, dt);
    for (auto& t : confirmed_) predict(t, f, q);
    for (auto& t : candidates_) predict(t, f, q);

    const Clustering clusters = dbscan(frame, config_.eps, config_.min_points);
    std::vector<ExtensionObservation> obs;
    obs.reserve(clusters.clusters.size());
    for (const auto& c : clusters.clusters) obs.push_back(extension_observation(frame, c));

    const int window = config_.window;
    auto apply = [&](Track& t, int o) {
        // R_k from the predicted position.
        update(t, obs[static_cast<std::size_t>(o)], h_, measurement_covariance(t.x, config_.noise));
        t.record(true, config_.lifecycle.n);
        t.push_cloud({frame.k, members_of(frame, clusters.clusters[static_cast<std::size_t>(o)]), std::nullopt},
                     window);
    };

    // Confirmed tracks claim clusters first; candidates compete only for what is left.
    std::vector<int> free_obs(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) free_obs[i] = static_cast<int>(i);
    for (auto* group : {&confirmed_, &candidates_}) {
        std::vector<ExtensionObservation> sub;
        for (int o : free_obs) sub.push_back(obs[static_cast<std::size_t>(o)]);
        std::vector<char> hit(group->size(), 0);
        std::vector<int> left;
        if (!group->empty() && !sub.empty()) {
            const ScoreMatrix scores = cjpda_scores(*group, sub, config_.beta, config_.noise);
            const Assignment a = gate_and_associate(scores, config_.gamma_min);
            for (const auto& [r, c] : a.matches) {
                apply((*group)[static_cast<std::size_t>(c)], free_obs[static_cast<std::size_t>(r)]);
                hit[static_cast<std::size_t>(c)] = 1;
            }
            for (int r : a.unmatched_rows) left.push_back(free_obs[static_cast<std::size_t>(r)]);
        } else {
            left = free_obs;
        }
        for (std::size_t t = 0; t < group->size(); ++t)
            if (!hit[t]) (*group)[t].record(false, config_.lifecycle.n);
        free_obs = std::move(left);
    }
    std::sort(free_obs.begin(), free_obs.end());
    for (int o : free_obs) {
        Track t = init_track(next_id_++, obs[static_cast<std::size_t>(o)], config_.noise, frame.k, config_.classes);
        t.record(true, config_.lifecycle.n);
        t.push_cloud({frame.k, members_of(frame, clusters.clusters[static_cast<std::size_t>(o)]), std::nullopt}, window);
        candidates_.push_back(std::move(t));
    }

    lifecycle(confirmed_, candidates_, config_.lifecycle);
    proximity_prune(confirmed_, config_.eps);
    std::erase_if(candidates_, [&](const Track& c) {
        return std::any_of(confirmed_.begin(), confirmed_.end(),
                           [&](const Track& t) { return (t.position() - c.position()).norm() < config_.eps; });
    });

    for (auto* group : {&confirmed_, &candidates_})
        for (auto& t : *group)
            while (!t.buffer.empty() && t.buffer.front().k <= frame.k - window) t.buffer.pop_front();
}

const Eigen::VectorXf& Pipeline::features(Track& track, BufferedCloud& cloud) {
    if (!cloud.features) {
        // Seeded by track and frame so reports do not depend on evaluation order.
        std::mt19937_64 rng(static_cast<std::uint64_t>(track.id) * 0x9E3779B97F4A7C15ull ^
                            static_cast<std::uint64_t>(cloud.k));
        const auto step = classifier::preprocess_step(cloud.points, model_->standardization, model_->n_max, rng);
        cloud.features = classifier::pc_block<float>(*model_, step);
    }
    return *cloud.features;
}

std::vector<std::optional<Eigen::VectorXd>> Pipeline::classify() {
    std::vector<std::optional<Eigen::VectorXd>> out(confirmed_.size());
    for (std::size_t i = 0; i < confirmed_.size(); ++i) {
        Track& t = confirmed_[i];
        if (!identify::eligible(t, config_.window)) continue;
        classifier::Mat<float> seq(static_cast<Eigen::Index>(t.buffer.size()), classifier::kFeatureDim);
        Eigen::Index row = 0;
        for (auto& cloud : t.buffer) seq.row(row++) = features(t, cloud).transpose();
        out[i] = classifier::temporal_block<float>(*model_, seq).probabilities.cast<double>();
    }
    return out;
}

FrameReport Pipeline::step(const Frame& frame) {
    if (last_k_ && frame.k <= *last_k_)
        throw Error("pipeline: frame index " + std::to_string(frame.k) + " does not follow " + std::to_string(*last_k_));
    FrameReport report;
    report.k = frame.k;

    auto t0 = Clock::now();
    track(frame);
    last_k_ = frame.k;
    report.tracking_ms = elapsed_ms(t0);

    t0 = Clock::now();
    identify::IdentityAssignment labels;
    std::vector<std::optional<Eigen::VectorXd>> outputs;
    if (model_ != nullptr) {
        outputs = classify();
        labels = identify::joint_identify(confirmed_, outputs, config_.identify, frame.k);
    }
    report.inference_ms = elapsed_ms(t0);

    for (std::size_t i = 0; i < confirmed_.size(); ++i) {
        const Track& t = confirmed_[i];
        TrackReport r;
        r.id = t.id;
        r.identity = model_ ? labels.labels[i] : kUnknownIdentity;
        r.x = t.x;
        r.p_diag = t.P.diagonal();
        r.classified = model_ && outputs[i].has_value();
        report.tracks.push_back(r);
    }
    if (model_ != nullptr) report.respawns = identify::correct_tracks(confirmed_, labels, next_id_, frame.k);
    return report;
}

LatencyStats latency_stats(std::vector<double> samples) {
    LatencyStats s;
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    double sum = 0;
    for (double v : samples) sum += v;
    s.mean_ms = sum / static_cast<double>(samples.size());
    const auto idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size()))) - 1;
    s.p95_ms = samples[std::min(idx, samples.size() - 1)];
    s.max_ms = samples.back();
    return s;
}

RunSummary summarize(const std::vector<FrameReport>& reports) {
    RunSummary s;
    s.frames = reports.size();
    std::vector<double> tt, ti, total;
    std::set<std::int64_t> ids;
    for (const auto& r : reports) {
        tt.push_back(r.tracking_ms);
        ti.push_back(r.inference_ms);
        total.push_back(r.tracking_ms + r.inference_ms);
        for (const auto& t : r.tracks) ids.insert(t.id);
        s.respawns += r.respawns.size();
    }
    s.tracking = latency_stats(tt);
    s.inference = latency_stats(ti);
    s.total = latency_stats(total);
    s.distinct_tracks = ids.size();
    return s;
}

std::vector<FrameReport> run(const std::vector<Frame>& frames, const PipelineConfig& config,
                             const classifier::Tcpcn<float>* model) {
    Pipeline p(config, model);
    std::vector<FrameReport> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(p.step(f));
    return out;
}

}  // namespace mmtrack::pipeline
