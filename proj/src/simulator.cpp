#include "mmtrack/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mmtrack/clustering.hpp"
#include "mmtrack/frontend.hpp"

namespace mmtrack::sim {

namespace {

constexpr double kTurnReversion = 1.0;   // OU mean reversion of the turn rate [1/s]
constexpr double kTurnDiffusion = 1.2;   // OU diffusion [rad/s per sqrt(s)]
constexpr double kWallMargin = 0.5;      // start steering back this far from a wall [m]
constexpr double kPersonalSpace = 1.2;   // start avoiding other walkers within this distance [m]
constexpr double kMinSeparation = 0.6;   // bodies never get closer than this, centre to centre [m]
constexpr double kPositionNoise = 0.03;  // per-point position jitter [m]
constexpr double kVelocityNoise = 0.05;  // per-point Doppler jitter [m/s]
constexpr double kPowerScale = 100.0;

struct Walker {
    Vector2d position = Vector2d::Zero();
    double heading = 0.0;  // direction of travel, angle from +x
    double turn_rate = 0.0;
    std::size_t waypoint = 0;
    double limb_phase = 0.0;
    bool moving = true;
};

Vector2d direction(double angle) { return {std::cos(angle), std::sin(angle)}; }

double wrap_angle(double a) { return std::remainder(a, 2 * kPi); }

void step_free(Walker& w, const GaitProfile& g, const Scenario& sc, const std::vector<Walker>& all, std::size_t self,
               std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double dt = sc.dt;
    w.turn_rate += -kTurnReversion * w.turn_rate * dt + kTurnDiffusion * std::sqrt(dt) * normal(rng);

    // Steering towards the arena centre near the walls, away from close walkers.
    const Vector2d center(0.5 * (sc.arena.x_min + sc.arena.x_max), 0.5 * (sc.arena.y_min + sc.arena.y_max));
    const Vector2d& p = w.position;
    const bool near_wall = p.x() - sc.arena.x_min < kWallMargin || sc.arena.x_max - p.x() < kWallMargin ||
                           p.y() - sc.arena.y_min < kWallMargin || sc.arena.y_max - p.y() < kWallMargin;
    double steer = 0.0;
    if (near_wall) {
        const Vector2d to_center = center - p;
        const double target = std::atan2(to_center.y(), to_center.x());
        const double err = wrap_angle(target - w.heading);
        if (std::abs(err) > kPi / 3) steer += 2.5 * err;
    }
    for (std::size_t j = 0; j < all.size(); ++j) {
        if (j == self) continue;
        const Vector2d d = all[j].position - p;
        const double dist = d.norm();
        if (dist >= kPersonalSpace || dist < 1e-9) continue;
        const double bearing = wrap_angle(std::atan2(d.y(), d.x()) - w.heading);
        if (std::abs(bearing) > kPi / 2) continue;
        const double side = bearing >= 0 ? -1.0 : 1.0;
        steer += side * 3.0 * (kPersonalSpace - dist) / kPersonalSpace;
    }
    w.heading = wrap_angle(w.heading + (w.turn_rate + steer) * dt);

    Vector2d next = p + g.speed * dt * direction(w.heading);
    Vector2d dir = direction(w.heading);
    if (next.x() < sc.arena.x_min || next.x() > sc.arena.x_max) dir.x() = -dir.x();
    if (next.y() < sc.arena.y_min || next.y() > sc.arena.y_max) dir.y() = -dir.y();
    w.heading = std::atan2(dir.y(), dir.x());

    // A step that closes in on someone already within reach is replaced by the smallest turn that does not.
    // With no such turn the walker waits.
    auto blocked = [&](const Vector2d& q) {
        for (std::size_t j = 0; j < all.size(); ++j) {
            if (j == self) continue;
            const double after = (all[j].position - q).norm();
            if (after < kMinSeparation && after < (all[j].position - p).norm()) return true;
        }
        return false;
    };
    auto clamp_to_arena = [&](Vector2d q) {
        q.x() = std::clamp(q.x(), sc.arena.x_min, sc.arena.x_max);
        q.y() = std::clamp(q.y(), sc.arena.y_min, sc.arena.y_max);
        return q;
    };
    for (int turn = 0; turn <= 10; ++turn) {
        const double heading = w.heading + (turn % 2 == 1 ? 1 : -1) * ((turn + 1) / 2) * (kPi / 6);
        next = clamp_to_arena(p + g.speed * dt * direction(heading));
        if (!blocked(next)) {
            w.heading = wrap_angle(heading);
            w.position = next;
            w.moving = true;
            return;
        }
    }
    w.moving = false;
}

void step_waypoints(Walker& w, const GaitProfile& g, const std::vector<Vector2d>& path, double dt) {
    double budget = g.speed * dt;
    w.moving = false;
    while (w.waypoint < path.size() && budget > 0) {
        const Vector2d d = path[w.waypoint] - w.position;
        const double dist = d.norm();
        if (dist <= budget) {
            if (dist > 0) w.heading = std::atan2(d.y(), d.x());
            w.position = path[w.waypoint];
            budget -= dist;
            ++w.waypoint;
            w.moving = dist > 0 || w.moving;
        } else {
            w.heading = std::atan2(d.y(), d.x());
            w.position += budget * d / dist;
            budget = 0;
            w.moving = true;
        }
    }
}

std::vector<RadarPoint> through_frontend(const std::vector<RadarPoint>& points, std::uint64_t seed) {
    frontend::RadarConfig cfg;
    std::vector<frontend::Reflector> reflectors;
    for (const auto& p : points) {
        const double range = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
        if (range < 0.1 || range >= cfg.max_range() * 0.95 || std::abs(p.v) >= cfg.max_velocity()) continue;
        frontend::Reflector r;
        r.range = range;
        r.velocity = p.v;
        r.azimuth = std::atan2(p.x, p.y);
        r.elevation = std::asin(p.z / range);
        r.amplitude = std::sqrt(std::max(p.power, 0.0));
        reflectors.push_back(r);
    }
    if (reflectors.empty()) return {};
    const auto cube = frontend::synthesize_cube(reflectors, cfg, 1e-3, static_cast<unsigned>(seed));
    return frontend::detect_points(cube, cfg);
}

}  // namespace

void GaitProfile::validate() const {
    if (!(speed > 0 && stride_frequency > 0 && limb_amplitude > 0 && length > 0 && width > 0 && points_at_1m > 0 &&
          exponent > 0 && height > 0.1))
        throw Error("GaitProfile " + std::to_string(subject) + ": every parameter must be positive");
    if (length < width) throw Error("GaitProfile " + std::to_string(subject) + ": length must be >= width");
}

void Scenario::validate() const {
    if (frames < 1) throw Error("Scenario: duration must be at least one frame");
    if (!(dt > 0)) throw Error("Scenario: dt must be positive");
    if (!(arena.x_max > arena.x_min && arena.y_max > arena.y_min)) throw Error("Scenario: empty arena");
    if (profiles.empty()) throw Error("Scenario: no subjects");
    if (!waypoints.empty() && waypoints.size() != profiles.size())
        throw Error("Scenario: need one waypoint list per subject");
    for (const auto& p : profiles) p.validate();
    for (const auto& path : waypoints) {
        if (path.empty()) throw Error("Scenario: empty waypoint list");
        for (const auto& w : path)
            if (!arena.contains(w.x(), w.y())) throw Error("Scenario: waypoint outside the arena");
    }
}

std::vector<GaitProfile> default_profiles(int count) {
    if (count < 1 || count > 8) throw Error("default_profiles: supports 1 to 8 subjects");
    // Columns: speed, stride frequency, limb amplitude, length, width, points at 1 m, height.
    static constexpr double table[8][7] = {
        {0.70, 1.40, 1.6, 0.44, 0.26, 140, 1.58}, {1.30, 2.10, 0.9, 0.54, 0.32, 160, 1.86},
        {0.95, 1.75, 2.2, 0.48, 0.28, 120, 1.70}, {1.10, 1.55, 1.2, 0.60, 0.36, 170, 1.92},
        {0.80, 2.30, 1.9, 0.42, 0.24, 130, 1.64}, {1.45, 1.90, 1.4, 0.52, 0.30, 150, 1.78},
        {0.60, 2.00, 0.7, 0.50, 0.34, 110, 1.74}, {1.20, 1.45, 2.5, 0.46, 0.27, 145, 1.68},
    };
    std::vector<GaitProfile> out;
    for (int i = 0; i < count; ++i) {
        const auto& r = table[i];
        GaitProfile g;
        g.subject = i;
        g.speed = r[0];
        g.stride_frequency = r[1];
        g.limb_amplitude = r[2];
        g.length = r[3];
        g.width = r[4];
        g.points_at_1m = r[5];
        g.height = r[6];
        g.exponent = 1.0;
        out.push_back(g);
    }
    return out;
}

bool segment_hits_ellipse(const Vector2d& a, const Vector2d& b, const Vector2d& c, double heading, double length,
                          double width) {
    // Map to the frame where the ellipse is the unit circle, then test segment-circle distance.
    const Vector2d along = direction(heading);
    const Vector2d across(-along.y(), along.x());
    auto to_unit = [&](const Vector2d& p) {
        const Vector2d d = p - c;
        return Vector2d(d.dot(across) / (0.5 * length), d.dot(along) / (0.5 * width));
    };
    const Vector2d pa = to_unit(a);
    const Vector2d pb = to_unit(b);
    const Vector2d ab = pb - pa;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0 ? std::clamp(-pa.dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (pa + t * ab).norm() <= 1.0;
}

std::vector<SimFrame> generate(const Scenario& sc) {
    sc.validate();
    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t n = sc.profiles.size();
    std::vector<Walker> walkers(n);
    for (std::size_t i = 0; i < n; ++i) {
        Walker& w = walkers[i];
        if (!sc.waypoints.empty()) {
            w.position = sc.waypoints[i].front();
            w.waypoint = 1;
            if (sc.waypoints[i].size() > 1) {
                const Vector2d d = sc.waypoints[i][1] - w.position;
                w.heading = std::atan2(d.y(), d.x());
            }
        } else {
            // Spread the starting points so walkers do not begin on top of each other.
            for (int attempt = 0; attempt < 100; ++attempt) {
                w.position = {sc.arena.x_min + kWallMargin + unif(rng) * (sc.arena.x_max - sc.arena.x_min - 2 * kWallMargin),
                              sc.arena.y_min + kWallMargin + unif(rng) * (sc.arena.y_max - sc.arena.y_min - 2 * kWallMargin)};
                bool clear = true;
                for (std::size_t j = 0; j < i; ++j)
                    if ((walkers[j].position - w.position).norm() < 1.5) clear = false;
                if (clear) break;
            }
            w.heading = unif(rng) * 2 * kPi - kPi;
        }
        w.limb_phase = unif(rng) * 2 * kPi;
    }

    std::vector<SimFrame> out;
    out.reserve(static_cast<std::size_t>(sc.frames));
    for (int k = 0; k < sc.frames; ++k) {
        if (k > 0) {
            for (std::size_t i = 0; i < n; ++i) {
                if (sc.waypoints.empty())
                    step_free(walkers[i], sc.profiles[i], sc, walkers, i, rng);
                else
                    step_waypoints(walkers[i], sc.profiles[i], sc.waypoints[i], sc.dt);
            }
        }
        const double t = k * sc.dt;
        SimFrame f;
        f.frame.k = k;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& g = sc.profiles[i];
            const auto& w = walkers[i];
            f.truth.push_back({g.subject, w.position.x(), w.position.y()});

            bool blocked = false;
            if (sc.blockage) {
                for (std::size_t j = 0; j < n && !blocked; ++j) {
                    if (j == i) continue;
                    blocked = segment_hits_ellipse(sc.radar, w.position, walkers[j].position, walkers[j].heading,
                                                   sc.profiles[j].length, sc.profiles[j].width);
                }
            }
            const double dist = std::max((w.position - sc.radar).norm(), 0.3);
            std::poisson_distribution<int> count(g.points_at_1m * std::pow(1.0 / dist, g.exponent));
            const int points = count(rng);

            const Vector2d along = direction(w.heading);
            const Vector2d across(-along.y(), along.x());
            const Vector2d torso = w.moving ? Vector2d(g.speed * along) : Vector2d::Zero();
            for (int p = 0; p < points; ++p) {
                const double r = std::sqrt(unif(rng));
                const double a = unif(rng) * 2 * kPi;
                Vector2d pos = w.position + across * (0.5 * g.length * r * std::cos(a)) +
                               along * (0.5 * g.width * r * std::sin(a));
                pos += kPositionNoise * Vector2d(normal(rng), normal(rng));
                const double z = 0.1 + unif(rng) * (g.height - 0.1);
                const Vector2d radial = (pos - sc.radar).normalized();
                const double limb_side = unif(rng) < 0.5 ? 0.0 : kPi;
                const double limb_weight = std::clamp(1.0 - z / g.height, 0.0, 1.0);
                const double v = torso.dot(radial) +
                                 g.limb_amplitude * std::sin(2 * kPi * g.stride_frequency * t + w.limb_phase + limb_side) *
                                     limb_weight +
                                 kVelocityNoise * normal(rng);
                const double power = kPowerScale * std::pow(dist, -g.exponent) * std::exp(0.3 * normal(rng));
                // Blocked points are still drawn so the random stream does not depend on blockage.
                if (blocked) continue;
                f.frame.points.push_back({pos.x(), pos.y(), z, v, power});
                f.point_subject.push_back(static_cast<int>(i));
            }
        }
        std::poisson_distribution<int> ghosts(sc.ghost_rate);
        const int g = sc.ghost_rate > 0 ? ghosts(rng) : 0;
        for (int i = 0; i < g; ++i) {
            const double x = sc.arena.x_min + unif(rng) * (sc.arena.x_max - sc.arena.x_min);
            const double y = sc.arena.y_min + unif(rng) * (sc.arena.y_max - sc.arena.y_min);
            const double dist = std::max(std::hypot(x - sc.radar.x(), y - sc.radar.y()), 0.3);
            f.frame.points.push_back(
                {x, y, unif(rng) * 2.0, 0.5 * normal(rng), 0.3 * kPowerScale / dist * std::exp(0.3 * normal(rng))});
            f.point_subject.push_back(-1);
        }
        if (sc.use_frontend) {
            f.frame.points = through_frontend(f.frame.points, sc.seed + static_cast<std::uint64_t>(k));
            f.point_subject.assign(f.frame.points.size(), -1);
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<classifier::LabeledSequence> generate_training_corpus(const std::vector<GaitProfile>& profiles,
                                                                  const CorpusOptions& opt) {
    if (profiles.size() < 2) throw Error("generate_training_corpus: need at least two profiles");
    if (opt.window < 1 || opt.stride < 1 || opt.rooms < 1 || !(opt.minutes > 0))
        throw Error("generate_training_corpus: invalid options");
    std::vector<classifier::LabeledSequence> out;
    for (std::size_t s = 0; s < profiles.size(); ++s) {
        const int total = static_cast<int>(std::lround(opt.minutes * 60.0 * opt.frame_rate));
        for (int room = 0; room < opt.rooms; ++room) {
            Scenario sc;
            sc.profiles = {profiles[s]};
            sc.frames = total / opt.rooms;
            sc.dt = 1.0 / opt.frame_rate;
            sc.blockage = false;
            // Rooms differ in size and position relative to the radar.
            sc.arena.x_min = -2.5 + 0.4 * room;
            sc.arena.x_max = 2.5 - 0.2 * room;
            sc.arena.y_min = 1.5 + 0.3 * room;
            sc.arena.y_max = 6.0 - 0.4 * room;
            sc.seed = opt.seed * 1000003ull + s * 101 + static_cast<std::uint64_t>(room);
            const auto frames = generate(sc);

            std::vector<std::vector<RadarPoint>> clouds;
            for (const auto& f : frames) {
                const auto clusters = dbscan(f.frame, opt.eps, opt.min_points);
                std::vector<RadarPoint> best;
                double best_d = 0.5;
                for (const auto& c : clusters.clusters) {
                    const auto z = extension_observation(f.frame, c);
                    const double d = std::hypot(z.mu_x - f.truth[0].x, z.mu_y - f.truth[0].y);
                    if (d < best_d) {
                        best_d = d;
                        best.clear();
                        for (int m : c.members) best.push_back(f.frame.points[static_cast<std::size_t>(m)]);
                    }
                }
                clouds.push_back(std::move(best));
            }
            for (int start = 0; start + opt.window <= static_cast<int>(clouds.size()); start += opt.stride) {
                classifier::LabeledSequence seq;
                seq.label = static_cast<int>(s);
                seq.steps.assign(clouds.begin() + start, clouds.begin() + start + opt.window);
                out.push_back(std::move(seq));
            }
        }
    }
    return out;
}

}  // namespace mmtrack::sim
