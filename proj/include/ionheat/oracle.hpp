#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ionheat/geometry.hpp"
#include "ionheat/species.hpp"
#include "ionheat/trap.hpp"

namespace ionheat {

// Flat single-sided PSD `psd` (units^2/Hz) on [f_lo_hz, f_hi_hz].
struct NoiseBand {
  double f_lo_hz = 0.0;
  double f_hi_hz = 0.0;
  double psd = 0.0;
};

struct NoiseRealization {
  std::uint64_t seed = 0;
  std::vector<NoiseBand> bands;
  double dt = 0.0;  // s
  std::vector<double> samples;
};

// Periodic Gaussian noise with period n_samples * dt built from independent
// spectral amplitudes (inverse real FFT). Every frequency bin inside a band
// carries a random tone with mean power psd * df. Each band draws from its own
// stream derived from the seed, so overlapping bands add independent noise.
NoiseRealization synthesize_noise(std::span<const NoiseBand> bands, double dt, std::size_t n_samples,
                                  std::uint64_t seed);

// Single-sided periodogram 2 |X_k|^2 dt / N for k = 0 .. N/2, with frequencies k / (N dt).
std::vector<double> periodogram(std::span<const double> samples, double dt);

struct EnsembleResult {
  double rate = 0.0;               // quanta/s
  double statistical_sigma = 0.0;  // quanta/s
  int n_realizations = 0;
  double linearity = 0.0;          // R^2 of the ensemble-mean energy vs time over the fit window
  double predicted_rate = 0.0;     // closed-form expectation for the same inputs
  std::vector<double> realization_rates;   // quanta/s, one per realization in seed order
  std::vector<double> trace_time;          // s
  std::vector<double> trace_mean_quanta;   // ensemble mean energy / (hbar w)
};

struct SecularOracleOptions {
  double duration = 0.0;      // s, at least 100 secular periods
  int n_realizations = 200;
  std::uint64_t seed = 1;
  double step = 0.0;          // s; 0 selects period / 40; at most period / 20
  std::optional<std::pair<double, double>> band_hz;  // default [0.8 f, 1.2 f]
  double initial_amplitude = 0.0;  // m, initial displacement of every realization
  int threads = 0;            // 0: hardware concurrency
};

// 1D harmonic oscillator driven by a uniform field noise E(t) with single-sided PSD s_e.
// Strang splitting (half kick, exact rotation, half kick).
EnsembleResult simulate_secular_heating(const IonSpecies& species, double omega, double s_e,
                                        const SecularOracleOptions& options);

struct RfOracleOptions {
  double duration = 0.0;           // s
  int n_realizations = 100;
  std::uint64_t seed = 1;
  int steps_per_rf_period = 64;    // at least 50
  double band_fraction = 0.1;      // sideband half-width as a fraction of w
  bool both_sidebands = true;
  int threads = 0;
};

// Trap with an extra uniform stray field chosen so that the equilibrium sits at
// `displacement` from the RF null.
struct DisplacedTrap {
  TrapConfig config;
  TrapOperatingPoint op;
  Vec3 null = Vec3::Zero();
  double axial_gradient = 0.0;  // d E0^2 / d axial, V^2/m^3
};
DisplacedTrap displace_from_null(const ElectrodeLayout& layout, const TrapConfig& config,
                                 const Vec3& displacement);

// Full RF-resolved 3D dynamics (velocity Verlet, layout fields) with additive
// voltage noise on the RF electrode of single-sided PSD `s_v_sideband` in bands
// around Omega + w and, if both_sidebands, Omega - w. Reports the axial heating
// rate of the deviation from a noiseless reference trajectory.
EnsembleResult simulate_rf_noise_heating(const ElectrodeLayout& layout, const TrapConfig& config,
                                         const Vec3& displacement, double s_v_sideband,
                                         const RfOracleOptions& options);

struct DriveResponseOptions {
  int steps_per_rf_period = 64;
  double initial_axial_amplitude = 20e-9;  // m, seeds parametric response
};

struct DriveResponse {
  double max_amplitude = 0.0;    // m, axial secular amplitude of the driven deviation
  double final_amplitude = 0.0;  // m
  TrapOperatingPoint op;
};

// Coherent tone A cos(w_d t) added to the RF electrode. The axial amplitude is
// that of the deviation from an undriven reference started from the same state.
DriveResponse simulate_drive_response(const ElectrodeLayout& layout, const TrapConfig& config,
                                      double drive_omega, double drive_amplitude, double duration,
                                      const DriveResponseOptions& options = {});

// One velocity-Verlet step for x'' = a(x, t).
template <typename State, typename Accel>
void verlet_step(State& x, State& v, State& a, double t, double dt, const Accel& accel) {
  v += 0.5 * dt * a;
  x += dt * v;
  a = accel(x, t + dt);
  v += 0.5 * dt * a;
}

}  // namespace ionheat
