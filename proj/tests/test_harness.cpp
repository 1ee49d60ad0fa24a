#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "mmtrack/harness.hpp"

using namespace mmtrack;
using namespace mmtrack::harness;

namespace {

EvalFrame frame(std::int64_t k, std::vector<sim::GroundTruth> truth, std::vector<Hypothesis> hyp) {
    return {k, std::move(truth), std::move(hyp)};
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("perfect tracking") {
    std::vector<EvalFrame> frames;
    for (int k = 0; k < 10; ++k)
        frames.push_back(frame(k, {{0, 0.0, 2.0}, {1, 1.0, 3.0}}, {{7, 0, 0.05, 2.0}, {8, 1, 1.0, 3.1}}));
    const auto r = evaluate(frames);
    CHECK(r.mota == 1.0);
    CHECK(r.weighted_accuracy == 1.0);
    CHECK(r.subject_tracked_frames.at(0) == 10);
}

TEST_CASE("empty hypotheses") {
    std::vector<EvalFrame> frames;
    for (int k = 0; k < 4; ++k) frames.push_back(frame(k, {{0, 0.0, 2.0}}, {}));
    const auto r = evaluate(frames);
    CHECK(r.mota == 0.0);
    CHECK(r.misses == 4);
    CHECK(r.false_positives == 0);
    CHECK(r.mismatches == 0);
    CHECK(r.warnings.size() == 1);
}

TEST_CASE("one swap counts two mismatches") {
    // Subjects 0 and 1 walk towards each other; the tracks trade subjects at frame 2.
    std::vector<EvalFrame> frames;
    const double x0[] = {-1.0, -0.5, 0.4, 0.9, 1.4};
    for (int k = 0; k < 5; ++k) {
        const double a = x0[k], b = -x0[k];
        const bool swapped = k >= 2;
        frames.push_back(frame(k, {{0, a, 3.0}, {1, b, 3.0}},
                               {{1, 0, swapped ? b : a, 3.0}, {2, 1, swapped ? a : b, 3.0}}));
    }
    const auto r = evaluate(frames);
    CHECK(r.mismatches == 2);
    CHECK(r.misses == 0);
    CHECK(r.false_positives == 0);
    CHECK(r.mota == doctest::Approx(1.0 - 2.0 / 10.0));
}

TEST_CASE("false positives and gate") {
    std::vector<EvalFrame> frames{frame(0, {{0, 0.0, 2.0}}, {{1, 0, 0.0, 3.5}, {2, 0, 5.0, 5.0}})};
    const auto r = evaluate(frames, 1.0);
    CHECK(r.misses == 1);
    CHECK(r.false_positives == 2);
    CHECK(r.mota == -2.0);
    CHECK_THROWS_AS(evaluate(std::vector<EvalFrame>{frame(0, {}, {{1, 0, 0, 0}})}), Error);
}

TEST_CASE("merging respawned fragments by identity") {
    std::vector<EvalFrame> frames;
    for (int k = 0; k < 6; ++k) frames.push_back(frame(k, {{0, 0.0, 2.0}}, {{k < 3 ? 4 : 9, 0, 0.0, 2.0}}));
    const auto raw = evaluate(frames);
    const auto merged = evaluate(merge_by_identity(frames));
    CHECK(raw.mismatches == 1);
    CHECK(merged.mismatches == 0);
    CHECK(merged.mota >= raw.mota);
    // Unlabelled tracks keep their ids.
    std::vector<EvalFrame> unknown{frame(0, {{0, 0, 2}}, {{3, kUnknownIdentity, 0, 2}})};
    CHECK(merge_by_identity(unknown)[0].hypotheses[0].id == 3);
}

TEST_CASE("identification accuracy") {
    std::vector<EvalFrame> frames;
    for (int k = 0; k < 10; ++k) frames.push_back(frame(k, {{0, 0, 2}, {1, 2, 4}}, {{1, 0, 0, 2}, {2, 0, 2, 4}}));
    CHECK(evaluate(frames).weighted_accuracy == doctest::Approx(0.5));
    CHECK(weighted_accuracy({{0, 1.0}, {1, 0.8}}, {{0, 100}, {1, 300}}) == doctest::Approx(0.85));
    CHECK(weighted_accuracy({}, {}) == 0.0);
}

TEST_CASE("frame files round trip") {
    sim::Scenario sc;
    sc.profiles = sim::default_profiles(2);
    sc.frames = 20;
    const auto records = to_records(sim::generate(sc));
    std::stringstream buf;
    write_frames(buf, records);
    const auto back = read_frames(buf);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].frame.k == records[i].frame.k);
        CHECK(back[i].frame.points == records[i].frame.points);
        CHECK(back[i].truth.size() == records[i].truth.size());
    }
}

TEST_CASE("malformed frame lines are reported by number") {
    std::stringstream buf;
    buf << R"({"format":"mmtrack-frames","version":1})" << '\n'
        << R"({"k":0,"points":[]})" << '\n'
        << R"({"k":1,"points":[[1,2,3]]})" << '\n';
    try {
        read_frames(buf);
        FAIL("accepted a malformed record");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::stringstream wrong(R"({"format":"other","version":1})");
    CHECK_THROWS_AS(read_frames(wrong), Error);
    std::stringstream version(R"({"format":"mmtrack-frames","version":2})");
    CHECK_THROWS_AS(read_frames(version), Error);
}

TEST_CASE("report files round trip") {
    pipeline::FrameReport r;
    r.k = 3;
    pipeline::TrackReport t;
    t.id = 5;
    t.identity = 2;
    t.x << 0.123456789012, 2, 0.1, -0.2, 0.5, 0.3, 1.0;
    t.p_diag.setConstant(0.01);
    t.classified = true;
    r.tracks.push_back(t);
    r.respawns.push_back({4, 5, 2});
    r.tracking_ms = 1.5;
    std::stringstream buf;
    pipeline::PipelineConfig cfg;
    cfg.identify.rho = 0.8;
    write_reports(buf, std::vector<pipeline::FrameReport>{r}, cfg);
    std::map<std::string, std::string> header;
    const auto back = read_reports(buf, &header);
    REQUIRE(back.size() == 1);
    CHECK(back[0].tracks[0].x == t.x);
    CHECK(back[0].tracks[0].identity == 2);
    CHECK(back[0].respawns[0].old_id == 4);
    CHECK(std::stod(header.at("rho")) == 0.8);
}

TEST_CASE("report files hold one line per frame after the header") {
    std::vector<pipeline::FrameReport> reports(37);
    for (std::size_t i = 0; i < reports.size(); ++i) reports[i].k = static_cast<std::int64_t>(i);
    reports[5].tracks.resize(2);
    std::stringstream buf;
    write_reports(buf, reports, pipeline::PipelineConfig{});
    std::string line;
    int lines = 0;
    while (std::getline(buf, line)) ++lines;
    CHECK(lines == 38);
}

TEST_CASE("alignment needs matching frames") {
    std::vector<FrameRecord> truth(2);
    truth[1].frame.k = 1;
    std::vector<pipeline::FrameReport> reports(1);
    CHECK_THROWS_AS(align(truth, reports), Error);
}

TEST_CASE("configuration parsing") {
    std::stringstream in("# tuned\neps = 0.5\nsigma_azimuth = pi/12  # comment\nK = 20\n\nclassify = false\n");
    const auto cfg = parse_config(in);
    CHECK(cfg.eps == 0.5);
    CHECK(cfg.noise.sigma_azimuth == doctest::Approx(kPi / 12));
    CHECK(cfg.window == 20);
    CHECK(cfg.identify.window == 20);
    CHECK_FALSE(cfg.classify);
    CHECK(cfg.beta == 0.01);

    std::stringstream round(format_config(cfg));
    const auto again = parse_config(round);
    CHECK(again.eps == cfg.eps);
    CHECK(again.noise.sigma_azimuth == cfg.noise.sigma_azimuth);
    CHECK(again.dt == doctest::Approx(cfg.dt));

    auto fails_on_line = [](const std::string& text, const std::string& line) {
        std::stringstream s(text);
        try {
            parse_config(s);
        } catch (const Error& e) {
            return std::string(e.what()).find(line) != std::string::npos;
        }
        return false;
    };
    CHECK(fails_on_line("eps = 0.4\nbogus = 1\n", "line 2"));
    CHECK(fails_on_line("m = ten\n", "line 1"));
    CHECK(fails_on_line("eps 0.4\n", "line 1"));
    CHECK(fails_on_line("K = 31\n", "K"));
}

TEST_CASE("scenario files") {
    const auto sc = parse_scenario(R"({"profiles": [0, 3], "frames": 50, "seed": 9, "blockage": false,
                                       "waypoints": [[[0, 3]], [[1, 4], [-1, 4]]]})");
    CHECK(sc.profiles.size() == 2);
    CHECK(sc.profiles[1].stride_frequency == sim::default_profiles(4)[3].stride_frequency);
    CHECK(sc.frames == 50);
    CHECK_FALSE(sc.blockage);
    CHECK(sc.waypoints[1].size() == 2);
    CHECK_THROWS_AS(parse_scenario(R"({"profiles": 2, "colour": "red"})"), Error);
    CHECK_THROWS_AS(parse_scenario(R"({"frames": 10})"), Error);
    CHECK_THROWS_AS(parse_scenario("not json"), Error);
}

}
