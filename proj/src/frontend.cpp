#include "mmtrack/frontend.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <unsupported/Eigen/FFT>

namespace mmtrack::frontend {

namespace {

constexpr int kAngleFftSize = 64;

std::complex<double> cis(double phase) { return {std::cos(phase), std::sin(phase)}; }

double signed_phase(double k, int n) {
    double psi = 2.0 * kPi * k / n;
    if (psi > kPi) psi -= 2.0 * kPi;
    return psi;
}

// Sub-bin offset of a peak from its two neighbors (three-point parabola).
double parabolic_offset(double left, double centre, double right) {
    const double denom = left - 2.0 * centre + right;
    if (std::abs(denom) < 1e-300) return 0.0;
    return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

}  // namespace

void RadarConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error("invalid RadarConfig: " + msg); };
    if (!(start_frequency > 0)) fail("start frequency must be positive");
    if (!(bandwidth > 0) || !(chirp_duration > 0)) fail("bandwidth and chirp duration must be positive");
    if (samples_per_chirp < 1 || chirps_per_frame < 1 || tx_antennas < 1 || rx_antennas < 1)
        fail("counts must be >= 1");
    if (!(fast_time_period > 0) || !(chirp_repetition > 0) || !(frame_period > 0) || !(element_spacing > 0))
        fail("periods and spacing must be positive");
    if (samples_per_chirp * fast_time_period > chirp_duration * (1 + 1e-12)) fail("M * T_f exceeds chirp duration");
    if (chirps_per_frame * chirp_repetition * tx_antennas > frame_period * (1 + 1e-12))
        fail("L * T_rep * N_TX exceeds frame period");
}

DataCube::DataCube(int antennas_, int chirps_, int samples_)
    : antennas(antennas_), chirps(chirps_), samples(samples_),
      channels(static_cast<std::size_t>(antennas_), Eigen::MatrixXcd::Zero(chirps_, samples_)) {}

double DataCube::energy() const {
    double e = 0.0;
    for (const auto& c : channels) e += c.squaredNorm();
    return e;
}

RadarPoint reflector_position(const Reflector& r) {
    RadarPoint p;
    p.x = r.range * std::cos(r.elevation) * std::sin(r.azimuth);
    p.y = r.range * std::cos(r.elevation) * std::cos(r.azimuth);
    p.z = r.range * std::sin(r.elevation);
    p.v = r.velocity;
    p.power = r.amplitude * r.amplitude;
    return p;
}

DataCube synthesize_cube(const std::vector<Reflector>& reflectors, const RadarConfig& cfg, double noise_std,
                         unsigned seed) {
    cfg.validate();
    if (!(noise_std >= 0)) throw Error("synthesize_cube: noise_std must be >= 0");

    for (std::size_t i = 0; i < reflectors.size(); ++i) {
        const auto& r = reflectors[i];
        std::ostringstream why;
        if (!(r.range > 0) || r.range >= cfg.max_range())
            why << "range " << r.range << " m outside (0, " << cfg.max_range() << ")";
        else if (std::abs(r.velocity) >= cfg.max_velocity())
            why << "velocity " << r.velocity << " m/s outside +-" << cfg.max_velocity();
        else if (std::abs(r.azimuth) >= kPi / 2 || std::abs(r.elevation) >= kPi / 2)
            why << "angle outside the half-space in front of the radar";
        if (!why.str().empty())
            throw Error("synthesize_cube: reflector " + std::to_string(i) + " rejected: " + why.str());
    }

    const int n_rx = cfg.rx_antennas;
    DataCube cube(cfg.virtual_antennas(), cfg.chirps_per_frame, cfg.samples_per_chirp);
    const double ts = cfg.slow_time_period();
    const double tf = cfg.fast_time_period;

    for (const auto& r : reflectors) {
        const double fd = 2.0 * cfg.start_frequency * r.velocity / kSpeedOfLight;
        const double fb = 2.0 * cfg.slope() * r.range / kSpeedOfLight;
        const double k_spatial = 2.0 * kPi * cfg.element_spacing / cfg.wavelength();
        const double psi_az = k_spatial * std::cos(r.elevation) * std::sin(r.azimuth);
        const double psi_el = k_spatial * std::sin(r.elevation);
        const double base = 2.0 * kPi * 2.0 * cfg.start_frequency * r.range / kSpeedOfLight;

        for (int ant = 0; ant < cube.antennas; ++ant) {
            const int a = ant % n_rx;
            const int e = ant / n_rx;
            const double spatial = a * psi_az + e * psi_el;
            auto& ch = cube.channels[static_cast<std::size_t>(ant)];
            for (int l = 0; l < cube.chirps; ++l) {
                const double slow = 2.0 * kPi * fd * l * ts;
                for (int m = 0; m < cube.samples; ++m) {
                    const double fast = 2.0 * kPi * (fd + fb) * m * tf;
                    ch(l, m) += r.amplitude * cis(base + slow + fast + spatial);
                }
            }
        }
    }

    if (noise_std > 0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, noise_std / std::sqrt(2.0));
        for (auto& ch : cube.channels)
            for (Eigen::Index i = 0; i < ch.size(); ++i) ch(i) += std::complex<double>(gauss(rng), gauss(rng));
    }
    return cube;
}

RDMap range_doppler(const DataCube& cube) {
    if (cube.antennas < 1 || static_cast<int>(cube.channels.size()) != cube.antennas)
        throw Error("range_doppler: malformed cube");
    Eigen::FFT<double> fft;
    RDMap map;
    map.power = Eigen::MatrixXd::Zero(cube.chirps, cube.samples);
    map.antenna_maps.reserve(cube.channels.size());

    std::vector<std::complex<double>> in, out;
    for (const auto& ch : cube.channels) {
        Eigen::MatrixXcd spec(cube.chirps, cube.samples);
        // Fast time (range) per chirp.
        in.resize(static_cast<std::size_t>(cube.samples));
        for (int l = 0; l < cube.chirps; ++l) {
            for (int m = 0; m < cube.samples; ++m) in[static_cast<std::size_t>(m)] = ch(l, m);
            fft.fwd(out, in);
            for (int m = 0; m < cube.samples; ++m) spec(l, m) = out[static_cast<std::size_t>(m)];
        }
        // Slow time (Doppler) per range bin.
        in.resize(static_cast<std::size_t>(cube.chirps));
        for (int m = 0; m < cube.samples; ++m) {
            for (int l = 0; l < cube.chirps; ++l) in[static_cast<std::size_t>(l)] = spec(l, m);
            fft.fwd(out, in);
            for (int l = 0; l < cube.chirps; ++l) spec(l, m) = out[static_cast<std::size_t>(l)];
        }
        map.power += spec.cwiseAbs2();
        map.antenna_maps.push_back(std::move(spec));
    }
    return map;
}

DataCube mti_filter(const DataCube& cube) {
    if (cube.chirps < 2) throw Error("mti_filter: needs at least 2 chirps");
    DataCube out = cube;
    for (auto& ch : out.channels) {
        const Eigen::RowVectorXcd mean = ch.colwise().mean();
        ch.rowwise() -= mean;
    }
    return out;
}

std::vector<Detection> cfar_detect(const Eigen::MatrixXd& power, int guard, int train, double scale) {
    if (guard < 0 || train < 1 || !(scale > 0)) throw Error("cfar_detect: need guard >= 0, train >= 1, scale > 0");
    const int window = 2 * (guard + train) + 1;
    const int rows = static_cast<int>(power.rows());
    const int cols = static_cast<int>(power.cols());
    if (rows < window || cols < window)
        throw Error("cfar_detect: map " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " smaller than the " + std::to_string(window) + "x" + std::to_string(window) + " window");

    // Summed-area table with a zero border row/column.
    Eigen::MatrixXd sat = Eigen::MatrixXd::Zero(rows + 1, cols + 1);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) sat(r + 1, c + 1) = power(r, c) + sat(r, c + 1) + sat(r + 1, c) - sat(r, c);

    auto box = [&](int r0, int c0, int r1, int c1, double& sum, int& count) {
        r0 = std::max(r0, 0);
        c0 = std::max(c0, 0);
        r1 = std::min(r1, rows - 1);
        c1 = std::min(c1, cols - 1);
        if (r0 > r1 || c0 > c1) {
            sum = 0.0;
            count = 0;
            return;
        }
        sum = sat(r1 + 1, c1 + 1) - sat(r0, c1 + 1) - sat(r1 + 1, c0) + sat(r0, c0);
        count = (r1 - r0 + 1) * (c1 - c0 + 1);
    };

    const int outer = guard + train;
    std::vector<Detection> detections;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double outer_sum, inner_sum;
            int outer_n, inner_n;
            box(r - outer, c - outer, r + outer, c + outer, outer_sum, outer_n);
            box(r - guard, c - guard, r + guard, c + guard, inner_sum, inner_n);
            const int n = outer_n - inner_n;
            if (n <= 0) continue;
            const double noise = std::max(outer_sum - inner_sum, 0.0) / n;
            if (power(r, c) > scale * noise) detections.push_back({c, r});
        }
    }
    return detections;
}

std::optional<RadarPoint> estimate_point(const RDMap& map, const Detection& bin, const RadarConfig& cfg,
                                         std::vector<std::string>* diagnostics) {
    const int n_doppler = static_cast<int>(map.power.rows());
    const int n_range = static_cast<int>(map.power.cols());
    if (bin.range_bin < 0 || bin.range_bin >= n_range || bin.doppler_bin < 0 || bin.doppler_bin >= n_doppler)
        throw Error("estimate_point: detection outside map");
    if (static_cast<int>(map.antenna_maps.size()) != cfg.virtual_antennas())
        throw Error("estimate_point: antenna count does not match config");

    const double fb = bin.range_bin / (cfg.samples_per_chirp * cfg.fast_time_period);
    const int signed_doppler = bin.doppler_bin >= n_doppler / 2 ? bin.doppler_bin - n_doppler : bin.doppler_bin;
    const double fd = signed_doppler / (cfg.chirps_per_frame * cfg.slow_time_period());
    const double range = fb * kSpeedOfLight / (2.0 * cfg.slope());
    const double velocity = fd * kSpeedOfLight / (2.0 * cfg.start_frequency);

    // Zero-padded 2D spatial DFT over the (azimuth, elevation) virtual grid.
    const int n_rx = cfg.rx_antennas;
    const int n_tx = cfg.tx_antennas;
    const int n = kAngleFftSize;
    Eigen::MatrixXd spectrum(n, n);
    for (int ka = 0; ka < n; ++ka) {
        for (int ke = 0; ke < n; ++ke) {
            std::complex<double> acc = 0.0;
            for (int e = 0; e < n_tx; ++e)
                for (int a = 0; a < n_rx; ++a)
                    acc += map.antenna_maps[static_cast<std::size_t>(e * n_rx + a)](bin.doppler_bin, bin.range_bin) *
                           cis(-2.0 * kPi * (double(a) * ka + double(e) * ke) / n);
            spectrum(ka, ke) = std::norm(acc);
        }
    }
    Eigen::Index pa = 0, pe = 0;
    spectrum.maxCoeff(&pa, &pe);
    auto at = [&](Eigen::Index i, Eigen::Index j) { return spectrum((i + n) % n, (j + n) % n); };
    const double ka = pa + parabolic_offset(at(pa - 1, pe), at(pa, pe), at(pa + 1, pe));
    const double ke = n_tx > 1 ? pe + parabolic_offset(at(pa, pe - 1), at(pa, pe), at(pa, pe + 1)) : 0.0;
    const double psi_az = signed_phase(ka < 0 ? ka + n : ka, n);
    const double psi_el = n_tx > 1 ? signed_phase(ke < 0 ? ke + n : ke, n) : 0.0;

    const double scale = cfg.wavelength() / (2.0 * kPi * cfg.element_spacing);
    RadarPoint p;
    p.x = range * scale * psi_az;
    p.z = range * scale * psi_el;
    const double y2 = range * range - p.x * p.x - p.z * p.z;
    if (y2 < 0) {
        if (diagnostics)
            diagnostics->push_back("estimate_point: discarded detection at range bin " +
                                   std::to_string(bin.range_bin) + ", doppler bin " +
                                   std::to_string(bin.doppler_bin) + " (x^2 + z^2 > R^2)");
        return std::nullopt;
    }
    p.y = std::sqrt(y2);
    p.v = velocity;
    p.power = map.power(bin.doppler_bin, bin.range_bin);
    return p;
}

std::vector<RadarPoint> detect_points(const DataCube& cube, const RadarConfig& cfg, const CfarParams& cfar,
                                      std::vector<std::string>* diagnostics) {
    const RDMap map = range_doppler(mti_filter(cube));
    std::vector<RadarPoint> points;
    for (const auto& det : cfar_detect(map.power, cfar.guard, cfar.train, cfar.scale))
        if (auto p = estimate_point(map, det, cfg, diagnostics)) points.push_back(*p);
    return points;
}

}  // namespace mmtrack::frontend
