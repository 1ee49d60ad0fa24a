#pragma once

#include <cstdint>
#include <vector>

#include "mmtrack/classifier.hpp"
#include "mmtrack/types.hpp"

namespace mmtrack::sim {

/// Walker parameters that shape the point cloud and its Doppler signature.
struct GaitProfile {
    int subject = 0;
    double speed = 1.0;             // torso speed [m/s]
    double stride_frequency = 1.8;  // [Hz]
    double limb_amplitude = 1.0;    // peak limb velocity [m/s]
    double length = 0.5;            // body ellipse major axis, across the heading [m]
    double width = 0.3;             // body ellipse minor axis, along the heading [m]
    double points_at_1m = 150.0;    // mean point count at 1 m
    double exponent = 1.0;          // point count and power fall as distance^-exponent
    double height = 1.75;           // points spread over z in [0.1, height] [m]

    void validate() const;
};

/// `count` well separated profiles (count <= 8 keeps the stride frequencies disjoint).
std::vector<GaitProfile> default_profiles(int count);

struct Arena {
    double x_min = -2.5;
    double x_max = 2.5;
    double y_min = 1.5;
    double y_max = 6.0;

    bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
};

struct Scenario {
    std::vector<GaitProfile> profiles;
    /// Per-profile waypoint lists walked in order at the profile speed; the subject stays at the
    /// last one. Empty means a free walk for every subject.
    std::vector<std::vector<Vector2d>> waypoints;
    int frames = 100;
    double dt = 1.0 / 14.92;
    Arena arena;
    Vector2d radar = Vector2d::Zero();
    bool blockage = true;
    double ghost_rate = 3.0;  // mean clutter points per frame, uniform over the arena
    /// Route points through the synthetic FMCW chain (slow; each point becomes a reflector).
    bool use_frontend = false;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GroundTruth {
    int subject = 0;
    double x = 0.0;
    double y = 0.0;
};

struct SimFrame {
    Frame frame;
    std::vector<GroundTruth> truth;
    std::vector<int> point_subject;  // per point: subject index, or -1 for clutter
};

std::vector<SimFrame> generate(const Scenario& scenario);

struct CorpusOptions {
    double minutes = 10.0;  // per subject
    double frame_rate = 14.92;
    int rooms = 1;          // each subject's time is split across this many arena layouts
    int window = 30;
    int stride = 10;        // window - overlap
    double eps = 0.4;       // clustering used to isolate the walker, as the tracker would
    int min_points = 10;
    std::uint64_t seed = 1;
};

/// Single-walker free walks cut into labeled windows of cluster point clouds; steps where the
/// walker's cluster is not found are left empty. Labels are profile indices.
std::vector<classifier::LabeledSequence> generate_training_corpus(const std::vector<GaitProfile>& profiles,
                                                                  const CorpusOptions& options);

/// Whether the segment a-b crosses the ellipse centred at `c` with full axes (length across,
/// width along) the direction `heading`.
bool segment_hits_ellipse(const Vector2d& a, const Vector2d& b, const Vector2d& c, double heading, double length,
                          double width);

}  // namespace mmtrack::sim
