#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mmtrack/frontend.hpp"

namespace oracle {

/// Errors of the best-matching detected point per reflector, in units of one resolution
/// cell: range bin spacing, velocity resolution, and the 2 / N_RX azimuth-sine resolution of
/// the receive aperture. A reflector with no detected point counts as missed.
struct LoopbackResult {
    int missed = 0;
    double range_cells = 0.0;
    double velocity_cells = 0.0;
    double azimuth_cells = 0.0;
};

inline LoopbackResult loopback(const std::vector<mmtrack::frontend::Reflector>& reflectors,
                               const mmtrack::frontend::RadarConfig& cfg) {
    using namespace mmtrack::frontend;
    const auto points = detect_points(synthesize_cube(reflectors, cfg, 0.0), cfg);
    LoopbackResult out;
    const double az_cell = 2.0 / cfg.rx_antennas;
    for (const auto& r : reflectors) {
        double best = std::numeric_limits<double>::infinity();
        LoopbackResult e;
        for (const auto& p : points) {
            const double range = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
            const double dr = std::abs(range - r.range) / cfg.range_bin_spacing();
            const double dv = std::abs(p.v - r.velocity) / cfg.velocity_resolution();
            const double da = std::abs(p.x / range - std::cos(r.elevation) * std::sin(r.azimuth)) / az_cell;
            const double score = std::max({dr, dv, da});
            if (score < best) {
                best = score;
                e.range_cells = dr;
                e.velocity_cells = dv;
                e.azimuth_cells = da;
            }
        }
        if (!std::isfinite(best)) {
            ++out.missed;
            continue;
        }
        out.range_cells = std::max(out.range_cells, e.range_cells);
        out.velocity_cells = std::max(out.velocity_cells, e.velocity_cells);
        out.azimuth_cells = std::max(out.azimuth_cells, e.azimuth_cells);
    }
    return out;
}

inline std::vector<mmtrack::frontend::Reflector> loopback_scene() {
    return {{1.23, 0.71, 0.30, 0.05, 1.0},
            {2.57, -1.13, -0.45, 0.0, 0.8},
            {3.91, 2.02, 0.10, -0.10, 1.2},
            {5.06, -0.37, -0.05, 0.08, 1.0}};
}

}  // namespace oracle
