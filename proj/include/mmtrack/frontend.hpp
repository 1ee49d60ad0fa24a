#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "mmtrack/types.hpp"

namespace mmtrack::frontend {

/// FMCW MIMO radar parameters. Defaults reproduce the IWR1843 configuration used for the desk setup.
struct RadarConfig {
    double start_frequency = 77e9;      // f_o [Hz]
    double bandwidth = 3.072e9;         // B [Hz]
    double chirp_duration = 60e-6;      // T [s]
    double chirp_repetition = 68e-6;    // T_rep [s]
    double fast_time_period = 0.2e-6;   // T_f [s], 5 MHz ADC
    int samples_per_chirp = 256;        // M
    int chirps_per_frame = 64;          // L
    double frame_period = 1.0 / 14.92;  // Delta t [s]
    int tx_antennas = 3;                // N_TX
    int rx_antennas = 4;                // N_RX
    double element_spacing = 1.948e-3;  // d [m]

    double slope() const { return bandwidth / chirp_duration; }
    double wavelength() const { return kSpeedOfLight / start_frequency; }
    int virtual_antennas() const { return tx_antennas * rx_antennas; }
    /// Slow-time sampling period seen by one virtual element under TDM-MIMO.
    double slow_time_period() const { return chirp_repetition * tx_antennas; }

    /// c / 2B.
    double range_resolution() const { return kSpeedOfLight / (2.0 * bandwidth); }
    /// c / (2 f_o L T_rep N_TX).
    double velocity_resolution() const {
        return kSpeedOfLight / (2.0 * start_frequency * chirps_per_frame * chirp_repetition * tx_antennas);
    }
    /// Range spanned by one fast-time DFT bin; equals range_resolution() only when M T_f = T.
    double range_bin_spacing() const {
        return kSpeedOfLight / (2.0 * slope() * samples_per_chirp * fast_time_period);
    }
    double max_range() const { return range_bin_spacing() * samples_per_chirp; }
    double max_velocity() const { return velocity_resolution() * chirps_per_frame / 2.0; }

    /// Throws Error when an invariant is violated.
    void validate() const;
};

/// Ideal point reflector in polar coordinates. Azimuth is measured from boresight (+y) towards +x.
struct Reflector {
    double range = 1.0;
    double velocity = 0.0;
    double azimuth = 0.0;
    double elevation = 0.0;
    double amplitude = 1.0;
};

/// IF samples ordered (virtual antenna) -> (chirp l, sample m).
/// Virtual element index is e * N_RX + a, with a the azimuth position (RX index)
/// and e the elevation position (TX index) on a uniform grid of spacing d.
struct DataCube {
    int antennas = 0;
    int chirps = 0;
    int samples = 0;
    std::vector<Eigen::MatrixXcd> channels;

    DataCube() = default;
    DataCube(int antennas, int chirps, int samples);
    double energy() const;
};

/// Range-Doppler map: power indexed (Doppler bin, range bin) plus the per-antenna complex maps.
/// Doppler bins follow DFT order; bin l >= L/2 stands for negative velocity l - L.
struct RDMap {
    Eigen::MatrixXd power;
    std::vector<Eigen::MatrixXcd> antenna_maps;
};

struct Detection {
    int range_bin = 0;
    int doppler_bin = 0;
    friend bool operator==(const Detection&, const Detection&) = default;
};

struct CfarParams {
    int guard = 2;
    int train = 4;
    double scale = 10.0;
};

DataCube synthesize_cube(const std::vector<Reflector>& reflectors, const RadarConfig& cfg, double noise_std,
                         unsigned seed = 0);

RDMap range_doppler(const DataCube& cube);

DataCube mti_filter(const DataCube& cube);

/// Power over the whole cell window must fit; throws Error otherwise.
std::vector<Detection> cfar_detect(const Eigen::MatrixXd& power, int guard, int train, double scale);

/// Returns nullopt (and appends to diagnostics, when given) for geometrically inconsistent angle estimates.
std::optional<RadarPoint> estimate_point(const RDMap& map, const Detection& bin, const RadarConfig& cfg,
                                         std::vector<std::string>* diagnostics = nullptr);

/// MTI -> range-Doppler -> CA-CFAR -> per-detection estimation.
std::vector<RadarPoint> detect_points(const DataCube& cube, const RadarConfig& cfg, const CfarParams& cfar = {},
                                      std::vector<std::string>* diagnostics = nullptr);

/// Polar to Cartesian for a reflector, same axis convention as estimate_point.
RadarPoint reflector_position(const Reflector& r);

}  // namespace mmtrack::frontend
