#include <map>
#include <set>

#include "doctest.h"
#include "mmtrack/pipeline.hpp"
#include "mmtrack/simulator.hpp"

using namespace mmtrack;
using namespace mmtrack::pipeline;

namespace {

std::vector<Frame> frames_of(const std::vector<sim::SimFrame>& sim) {
    std::vector<Frame> out;
    for (const auto& f : sim) out.push_back(f.frame);
    return out;
}

std::vector<Frame> walkers(int subjects, int frames, std::uint64_t seed, bool clean = false) {
    sim::Scenario sc;
    sc.profiles = sim::default_profiles(subjects);
    sc.frames = frames;
    sc.seed = seed;
    if (clean) {
        sc.ghost_rate = 0.0;
        sc.blockage = false;
    }
    return frames_of(sim::generate(sc));
}

bool same_reports(const std::vector<FrameReport>& a, const std::vector<FrameReport>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].k != b[i].k || a[i].tracks.size() != b[i].tracks.size()) return false;
        if (a[i].respawns.size() != b[i].respawns.size()) return false;
        for (std::size_t t = 0; t < a[i].tracks.size(); ++t) {
            const auto &x = a[i].tracks[t], &y = b[i].tracks[t];
            if (x.id != y.id || x.identity != y.identity || x.x != y.x || x.p_diag != y.p_diag ||
                x.classified != y.classified)
                return false;
        }
    }
    return true;
}

// Kinematic content of one frame, independent of ids and ordering.
std::vector<std::vector<double>> states(const FrameReport& r) {
    std::vector<std::vector<double>> out;
    for (const auto& t : r.tracks) {
        std::vector<double> v(t.x.data(), t.x.data() + 7);
        v.insert(v.end(), t.p_diag.data(), t.p_diag.data() + 7);
        out.push_back(v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("cold start makes one candidate") {
    Pipeline p(PipelineConfig{}, nullptr);
    const auto frames = walkers(1, 1, 3, true);
    const auto r = p.step(frames[0]);
    CHECK(r.tracks.empty());
    REQUIRE(p.candidates().size() == 1);
    CHECK(p.candidates()[0].identity == kUnknownIdentity);
    CHECK(p.confirmed().empty());
}

TEST_CASE("one clean walker gives exactly one confirmed track") {
    const auto frames = walkers(1, 100, 4, true);
    const auto reports = run(frames, PipelineConfig{}, nullptr);
    REQUIRE(reports.size() == 100);
    CHECK(reports.back().tracks.size() == 1);
    std::set<std::int64_t> ids;
    for (const auto& r : reports)
        for (const auto& t : r.tracks) ids.insert(t.id);
    CHECK(ids.size() == 1);
    // Promotion needs m = 10 hits.
    CHECK(reports[8].tracks.empty());
    CHECK(reports[9].tracks.size() == 1);
}

TEST_CASE("identical input gives identical reports") {
    const auto model = classifier::Tcpcn<float>::random(8, 2);
    const auto frames = walkers(3, 150, 5);
    CHECK(same_reports(run(frames, PipelineConfig{}, &model), run(frames, PipelineConfig{}, &model)));
}

TEST_CASE("classification never changes the kinematics") {
    const auto model = classifier::Tcpcn<float>::random(8, 3);
    const auto frames = walkers(3, 200, 6);
    const auto with = run(frames, PipelineConfig{}, &model);
    PipelineConfig off;
    off.classify = false;
    const auto without = run(frames, off, &model);
    REQUIRE(with.size() == without.size());
    bool classified = false;
    for (std::size_t i = 0; i < with.size(); ++i) {
        CHECK(states(with[i]) == states(without[i]));
        for (const auto& t : with[i].tracks) classified |= t.classified;
        for (const auto& t : without[i].tracks) CHECK(t.identity == kUnknownIdentity);
    }
    CHECK(classified);
}

TEST_CASE("only eligible tracks are classified") {
    const auto model = classifier::Tcpcn<float>::random(8, 4);
    const auto frames = walkers(2, 120, 7);
    Pipeline p(PipelineConfig{}, &model);
    for (const auto& f : frames) {
        const auto r = p.step(f);
        for (std::size_t i = 0; i < r.tracks.size(); ++i) {
            const auto& t = p.confirmed()[i];
            // Respawns replace tracks after the report, so compare only untouched frames.
            if (r.respawns.empty() && r.tracks[i].classified) {
                CHECK(t.buffer.size() >= 15);
                CHECK(t.detected_last(15));
            }
        }
    }
}

TEST_CASE("empty input and empty frames") {
    CHECK(run({}, PipelineConfig{}, nullptr).empty());
    const auto s = summarize({});
    CHECK(s.frames == 0);
    CHECK(s.distinct_tracks == 0);
    std::vector<Frame> blank(20);
    for (int i = 0; i < 20; ++i) blank[static_cast<std::size_t>(i)].k = i;
    for (const auto& r : run(blank, PipelineConfig{}, nullptr)) {
        CHECK(r.tracks.empty());
        CHECK(r.tracking_ms >= 0);
        CHECK(r.inference_ms >= 0);
    }
}

TEST_CASE("contract violations") {
    const auto model = classifier::Tcpcn<float>::random(4, 1);
    try {
        Pipeline p(PipelineConfig{}, &model);
        FAIL("class mismatch accepted");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find('4') != std::string::npos);
        CHECK(msg.find('8') != std::string::npos);
    }
    PipelineConfig odd;
    odd.window = 31;
    CHECK_THROWS_AS(Pipeline(odd, nullptr), Error);
    Pipeline p(PipelineConfig{}, nullptr);
    Frame f;
    f.k = 5;
    p.step(f);
    CHECK_THROWS_AS(p.step(f), Error);
}

TEST_CASE("latency statistics") {
    const auto s = latency_stats({5, 1, 3, 2, 4, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20});
    CHECK(s.mean_ms == doctest::Approx(10.5));
    CHECK(s.p95_ms == 19);
    CHECK(s.max_ms == 20);
}

}
