#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mmtrack/association.hpp"
#include "mmtrack/classifier.hpp"
#include "mmtrack/identify.hpp"
#include "mmtrack/tracking.hpp"

namespace mmtrack::pipeline {

struct PipelineConfig {
    double eps = 0.4;
    int min_points = 10;
    NoiseConfig noise;
    double beta = 0.01;
    double gamma_min = 0.05;
    LifecycleParams lifecycle;
    int n_max = 100;
    int window = 30;  // K
    identify::IdentifyParams identify;
    double dt = 1.0 / 14.92;
    int classes = 8;
    bool classify = true;

    /// Throws Error on a violated invariant (K even, m <= n, positive radii and rates).
    void validate() const;
};

struct TrackReport {
    std::int64_t id = 0;
    int identity = kUnknownIdentity;
    Vector7d x = Vector7d::Zero();
    Vector7d p_diag = Vector7d::Zero();
    bool classified = false;  // classifier ran on this track this frame
};

struct FrameReport {
    std::int64_t k = 0;
    std::vector<TrackReport> tracks;  // confirmed tracks
    double tracking_ms = 0.0;         // clustering, association, filtering, lifecycle
    double inference_ms = 0.0;        // classifier and joint identification
    std::vector<identify::Respawn> respawns;  // applied after this report, effective next frame
};

class Pipeline {
public:
    /// `model` may be null, which disables identification; the caller keeps it alive.
    Pipeline(const PipelineConfig& config, const classifier::Tcpcn<float>* model);

    FrameReport step(const Frame& frame);

    const std::vector<Track>& confirmed() const { return confirmed_; }
    const std::vector<Track>& candidates() const { return candidates_; }
    const PipelineConfig& config() const { return config_; }

private:
    void track(const Frame& frame);
    std::vector<std::optional<Eigen::VectorXd>> classify();
    const Eigen::VectorXf& features(Track& track, BufferedCloud& cloud);

    PipelineConfig config_;
    const classifier::Tcpcn<float>* model_ = nullptr;
    std::vector<Track> confirmed_;
    std::vector<Track> candidates_;
    std::int64_t next_id_ = 0;
    std::optional<std::int64_t> last_k_;
    Matrix57d h_;
};

struct LatencyStats {
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double max_ms = 0.0;
};

LatencyStats latency_stats(std::vector<double> samples);

struct RunSummary {
    std::size_t frames = 0;
    LatencyStats tracking;
    LatencyStats inference;
    LatencyStats total;
    std::size_t distinct_tracks = 0;
    std::size_t respawns = 0;
};

RunSummary summarize(const std::vector<FrameReport>& reports);

/// Runs every frame through a fresh pipeline.
std::vector<FrameReport> run(const std::vector<Frame>& frames, const PipelineConfig& config,
                             const classifier::Tcpcn<float>* model);

}  // namespace mmtrack::pipeline
