#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mmtrack/pipeline.hpp"
#include "mmtrack/simulator.hpp"

namespace mmtrack::harness {

// --- file formats -----------------------------------------------------------------------

/// One frame record: the radar points plus optional ground truth.
struct FrameRecord {
    Frame frame;
    std::vector<sim::GroundTruth> truth;
};

/// JSON lines: a header {"format":"mmtrack-frames","version":1}, then one object per frame
/// {"k":..., "points":[[x,y,z,v,power],...], "gt":[{"subject":..,"x":..,"y":..}]}.
void write_frames(std::ostream& out, std::span<const FrameRecord> frames);
void write_frames(const std::string& path, std::span<const FrameRecord> frames);

/// Throws Error naming the 1-based line of a malformed record.
std::vector<FrameRecord> read_frames(std::istream& in);
std::vector<FrameRecord> read_frames(const std::string& path);

std::vector<FrameRecord> to_records(const std::vector<sim::SimFrame>& frames);

/// JSON lines: a header {"format":"mmtrack-report","version":1,"config":{...}}, then one object
/// per frame mirroring FrameReport.
void write_reports(std::ostream& out, std::span<const pipeline::FrameReport> reports,
                   const pipeline::PipelineConfig& config);
void write_reports(const std::string& path, std::span<const pipeline::FrameReport> reports,
                   const pipeline::PipelineConfig& config);
/// `header_config`, when given, receives the key/value pairs recorded in the header.
std::vector<pipeline::FrameReport> read_reports(std::istream& in,
                                                std::map<std::string, std::string>* header_config = nullptr);
std::vector<pipeline::FrameReport> read_reports(const std::string& path,
                                                std::map<std::string, std::string>* header_config = nullptr);

/// Scenario file (JSON object): "profiles" is a count of default profiles, a list of default
/// profile indices, or a list of profile objects; optional "frames", "seed", "blockage",
/// "ghost_rate", "dt", "arena" [x_min, x_max, y_min, y_max], "waypoints" (one [[x, y], ...] list
/// per subject) and "use_frontend".
sim::Scenario parse_scenario(const std::string& text);
sim::Scenario load_scenario(const std::string& path);

// --- configuration ----------------------------------------------------------------------

/// key = value lines, '#' starts a comment. Angles accept "pi/<number>". Unknown keys and
/// malformed values throw Error naming the line.
pipeline::PipelineConfig parse_config(std::istream& in);
pipeline::PipelineConfig load_config(const std::string& path);

/// Every key with its current value, in the same syntax parse_config accepts.
std::string format_config(const pipeline::PipelineConfig& config);

// --- metrics ----------------------------------------------------------------------------

struct Hypothesis {
    std::int64_t id = 0;
    int identity = kUnknownIdentity;
    double x = 0.0;
    double y = 0.0;
};

struct EvalFrame {
    std::int64_t k = 0;
    std::vector<sim::GroundTruth> truth;
    std::vector<Hypothesis> hypotheses;
};

struct EvalResult {
    double mota = 0.0;
    long misses = 0;
    long false_positives = 0;
    long mismatches = 0;
    long ground_truth = 0;
    std::map<int, double> subject_accuracy;
    std::map<int, long> subject_tracked_frames;
    double weighted_accuracy = 0.0;
    std::vector<std::string> warnings;
};

/// Pairs report frames with ground truth by frame index; both must cover the same frames.
std::vector<EvalFrame> align(std::span<const FrameRecord> truth, std::span<const pipeline::FrameReport> reports);

/// Rewrites each track id to the identity it carries in most of its labelled frames, so that
/// respawned fragments of one subject count as one hypothesis. Tracks never labelled keep
/// their own id; label ids and raw ids never collide.
std::vector<EvalFrame> merge_by_identity(std::span<const EvalFrame> frames);

/// MOTA with per-frame Hungarian matching on distance within match_radius. Identification
/// accuracy is computed over the matched (tracked) frames; subject s is correct when the
/// matched hypothesis carries identity s.
EvalResult evaluate(std::span<const EvalFrame> frames, double match_radius = 1.0);

/// Tracked-frame weighted mean of per-subject accuracies.
double weighted_accuracy(const std::map<int, double>& accuracy, const std::map<int, long>& frames);

}  // namespace mmtrack::harness
