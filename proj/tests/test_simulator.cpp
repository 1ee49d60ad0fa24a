#include <map>
#include <set>

#include "doctest.h"
#include "mmtrack/simulator.hpp"

using namespace mmtrack;
using namespace mmtrack::sim;

namespace {

Scenario static_subject(double y, double exponent, int frames) {
    Scenario sc;
    auto p = default_profiles(1)[0];
    p.exponent = exponent;
    sc.profiles = {p};
    sc.waypoints = {{Vector2d(0.0, y)}};
    sc.frames = frames;
    sc.blockage = false;
    sc.ghost_rate = 0.0;
    return sc;
}

bool same_frames(const std::vector<SimFrame>& a, const std::vector<SimFrame>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].frame.points != b[i].frame.points || a[i].point_subject != b[i].point_subject) return false;
    return true;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("same seed gives identical frames") {
    Scenario sc;
    sc.profiles = default_profiles(3);
    sc.frames = 200;
    sc.seed = 42;
    const auto a = generate(sc);
    CHECK(same_frames(a, generate(sc)));
    sc.seed = 43;
    CHECK_FALSE(same_frames(a, generate(sc)));
}

TEST_CASE("static subject centroid sits on the truth") {
    const auto frames = generate(static_subject(3.0, 1.0, 300));
    double sx = 0, sy = 0;
    long n = 0;
    for (const auto& f : frames) {
        CHECK_FALSE(f.frame.points.empty());
        CHECK(f.truth[0].x == 0.0);
        CHECK(f.truth[0].y == 3.0);
        for (const auto& p : f.frame.points) {
            sx += p.x;
            sy += p.y;
            ++n;
        }
    }
    // Per-axis spread of a point is below the half major axis; 3 standard errors.
    const double se = 0.5 * default_profiles(1)[0].length / std::sqrt(double(n));
    CHECK(std::abs(sx / n) < 3 * se);
    CHECK(std::abs(sy / n - 3.0) < 3 * se);
}

TEST_CASE("point count falls with distance") {
    auto count = [](double y) {
        double total = 0;
        for (const auto& f : generate(static_subject(y, 2.0, 1000))) total += f.frame.points.size();
        return total / 1000;
    };
    const double ratio = count(2.0) / count(4.0);
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("blockage only removes points") {
    Scenario sc;
    sc.profiles = default_profiles(3);
    sc.frames = 600;
    sc.seed = 5;
    sc.blockage = false;
    const auto open = generate(sc);
    sc.blockage = true;
    const auto blocked = generate(sc);
    long removed = 0;
    for (std::size_t i = 0; i < open.size(); ++i) {
        const auto& a = open[i].frame.points;
        const auto& b = blocked[i].frame.points;
        // b is a subsequence of a.
        std::size_t j = 0;
        for (const auto& p : a)
            if (j < b.size() && p == b[j]) ++j;
        CHECK(j == b.size());
        removed += static_cast<long>(a.size() - b.size());
        for (std::size_t s = 0; s < 3; ++s) {
            CHECK(open[i].truth[s].x == blocked[i].truth[s].x);
            CHECK(open[i].truth[s].y == blocked[i].truth[s].y);
        }
    }
    CHECK(removed > 0);
}

TEST_CASE("free walks stay in the arena") {
    Scenario sc;
    sc.profiles = default_profiles(4);
    sc.frames = 1500;
    for (const auto& f : generate(sc))
        for (const auto& g : f.truth) CHECK(sc.arena.contains(g.x, g.y));
}

TEST_CASE("free walkers keep their distance") {
    Scenario sc;
    sc.profiles = default_profiles(4);
    sc.frames = 3000;
    double closest = 1e9;
    for (const auto& f : generate(sc))
        for (std::size_t a = 0; a < f.truth.size(); ++a)
            for (std::size_t b = a + 1; b < f.truth.size(); ++b)
                closest = std::min(closest, std::hypot(f.truth[a].x - f.truth[b].x, f.truth[a].y - f.truth[b].y));
    CHECK(closest >= 0.6);
}

TEST_CASE("waypoints are followed at the profile speed") {
    Scenario sc = static_subject(2.0, 1.0, 150);
    sc.waypoints = {{Vector2d(-1.0, 3.0), Vector2d(1.0, 3.0)}};
    const auto frames = generate(sc);
    const double speed = sc.profiles[0].speed;
    CHECK(frames.back().truth[0].x == doctest::Approx(1.0));
    const double step = std::hypot(frames[5].truth[0].x - frames[4].truth[0].x, frames[5].truth[0].y - frames[4].truth[0].y);
    CHECK(step == doctest::Approx(speed * sc.dt));
}

TEST_CASE("segment and ellipse intersection") {
    const Vector2d radar(0, 0), target(0, 4);
    CHECK(segment_hits_ellipse(radar, target, Vector2d(0, 2), 0.0, 0.5, 0.3));
    CHECK_FALSE(segment_hits_ellipse(radar, target, Vector2d(1, 2), 0.0, 0.5, 0.3));
    CHECK_FALSE(segment_hits_ellipse(radar, target, Vector2d(0, 5), 0.0, 0.5, 0.3));
    // Length lies across the heading: walking along +y the ellipse is wide in x.
    CHECK(segment_hits_ellipse(radar, target, Vector2d(0.22, 2), kPi / 2, 0.5, 0.3));
    CHECK_FALSE(segment_hits_ellipse(radar, target, Vector2d(0.22, 2), 0.0, 0.5, 0.3));
}

TEST_CASE("training corpus windows") {
    CorpusOptions opt;
    opt.minutes = 1.0;
    opt.frame_rate = 15.0;
    const auto corpus = generate_training_corpus(default_profiles(2), opt);
    std::map<int, int> count;
    for (const auto& s : corpus) {
        CHECK(s.steps.size() == 30);
        ++count[s.label];
    }
    CHECK(count[0] == (900 - 30) / 10 + 1);
    CHECK(count[0] == 88);
    CHECK(count[1] == 88);

    // Equal minutes per subject give a balanced histogram.
    opt.rooms = 3;
    opt.minutes = 2.0;
    std::map<int, int> rooms;
    for (const auto& s : generate_training_corpus(default_profiles(3), opt)) ++rooms[s.label];
    for (const auto& [label, n] : rooms) CHECK(std::abs(n - rooms[0]) <= 0.05 * rooms[0]);
    CHECK_THROWS_AS(generate_training_corpus(default_profiles(1), opt), Error);
}

TEST_CASE("scenario validation") {
    Scenario sc;
    CHECK_THROWS_AS(generate(sc), Error);
    sc.profiles = default_profiles(2);
    sc.waypoints = {{Vector2d(0, 3)}};
    CHECK_THROWS_AS(generate(sc), Error);
    sc.waypoints = {{Vector2d(0, 3)}, {Vector2d(10, 3)}};
    CHECK_THROWS_AS(generate(sc), Error);
    auto p = default_profiles(1)[0];
    p.width = p.length + 0.1;
    CHECK_THROWS_AS(p.validate(), Error);
    CHECK_THROWS_AS(default_profiles(9), Error);
}

}
