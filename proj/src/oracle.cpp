#include "ionheat/oracle.hpp"

#include <atomic>
#include <cmath>
#include <complex>
#include <functional>
#include <mutex>
#include <random>
#include <thread>

#include <fftw3.h>

#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"
#include "ionheat/heating.hpp"
#include "ionheat/random.hpp"

namespace ionheat {

namespace {

using constants::kHbar;
using constants::kTwoPi;

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

void inverse_real_fft(std::vector<std::complex<double>>& spectrum, std::vector<double>& out) {
  const int n = static_cast<int>(out.size());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(spectrum.data()), out.data(),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

// Runs body(i) for i in [0, n) on `threads` workers. Each index is processed exactly once.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, std::max(n, 1));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Least-squares slope of y against t over indices [begin, end).
double slope_of(const std::vector<double>& t, const std::vector<double>& y, std::size_t begin) {
  const std::size_t end = t.size();
  const double n = static_cast<double>(end - begin);
  double tm = 0.0, ym = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    tm += t[i];
    ym += y[i];
  }
  tm /= n;
  ym /= n;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    sty += (t[i] - tm) * (y[i] - ym);
  }
  return sty / stt;
}

double r_squared(const std::vector<double>& t, const std::vector<double>& y, std::size_t begin) {
  const double b = slope_of(t, y, begin);
  const double n = static_cast<double>(t.size() - begin);
  double tm = 0.0, ym = 0.0;
  for (std::size_t i = begin; i < t.size(); ++i) {
    tm += t[i] / n;
    ym += y[i] / n;
  }
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = begin; i < t.size(); ++i) {
    const double fit = ym + b * (t[i] - tm);
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - ym) * (y[i] - ym);
  }
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

// Per-realization energy traces reduced to slopes and an ensemble-mean trace.
// Traces are accumulated in fixed blocks so the sum order does not depend on scheduling.
EnsembleResult reduce_ensemble(int n, int threads, double quantum, const std::vector<double>& time,
                               const std::function<std::vector<double>(int)>& run) {
  constexpr int kBlock = 16;
  const int n_blocks = (n + kBlock - 1) / kBlock;
  const std::size_t m = time.size();
  const std::size_t begin = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(m - 1)));
  std::vector<double> slopes(n);
  std::vector<std::vector<double>> block_sum(n_blocks, std::vector<double>(m, 0.0));
  parallel_for(n_blocks, threads, [&](int b) {
    for (int i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) {
      const std::vector<double> energy = run(i);
      slopes[i] = slope_of(time, energy, begin) / quantum;
      for (std::size_t k = 0; k < m; ++k) block_sum[b][k] += energy[k];
    }
  });
  EnsembleResult r;
  r.n_realizations = n;
  double mean = 0.0;
  for (double s : slopes) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : slopes) var += (s - mean) * (s - mean);
  var = n > 1 ? var / (n - 1) : 0.0;
  r.rate = mean;
  r.statistical_sigma = std::sqrt(var / n);
  r.realization_rates = slopes;
  r.trace_time = time;
  r.trace_mean_quanta.assign(m, 0.0);
  for (const auto& bs : block_sum) {
    for (std::size_t k = 0; k < m; ++k) r.trace_mean_quanta[k] += bs[k];
  }
  for (auto& e : r.trace_mean_quanta) e /= (n * quantum);
  r.linearity = r_squared(time, r.trace_mean_quanta, begin);
  return r;
}

std::size_t even_length(std::size_t n) { return n + (n % 2); }

}  // namespace

NoiseRealization synthesize_noise(std::span<const NoiseBand> bands, double dt, std::size_t n_samples,
                                  std::uint64_t seed) {
  if (!(dt > 0.0)) throw ValidationError("noise step must be positive");
  if (n_samples < 2) throw ValidationError("noise needs at least 2 samples");
  const double df = 1.0 / (static_cast<double>(n_samples) * dt);
  const double nyquist = 0.5 / dt;
  for (const auto& b : bands) {
    if (!(b.f_lo_hz >= 0.0) || !(b.f_hi_hz > b.f_lo_hz)) throw ValidationError("noise band must satisfy 0 <= f_lo < f_hi");
    if (!(b.f_hi_hz < nyquist)) throw ValidationError("noise band exceeds the Nyquist frequency of the step");
    if (!(b.psd >= 0.0)) throw ValidationError("noise PSD must be >= 0");
  }
  NoiseRealization out;
  out.seed = seed;
  out.bands.assign(bands.begin(), bands.end());
  out.dt = dt;
  out.samples.assign(n_samples, 0.0);

  const std::size_t n_bins = n_samples / 2 + 1;
  std::vector<std::complex<double>> spec(n_bins, 0.0);
  // One stream per band, so a band's noise does not depend on the other bands.
  for (std::size_t b = 0; b < bands.size(); ++b) {
    const auto& band = bands[b];
    if (band.psd == 0.0) continue;
    std::mt19937_64 rng(derive_seed(seed, b));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(band.psd * df);
    const auto k_lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(band.f_lo_hz / df)));
    for (std::size_t k = k_lo; k < n_bins && static_cast<double>(k) * df <= band.f_hi_hz; ++k) {
      if (2 * k == n_samples) break;  // Nyquist bin has no independent phase
      const double a = sd * normal(rng);
      const double c = sd * normal(rng);
      spec[k] += std::complex<double>(0.5 * a, -0.5 * c);
    }
  }
  inverse_real_fft(spec, out.samples);
  return out;
}

std::vector<double> periodogram(std::span<const double> samples, double dt) {
  const std::size_t n = samples.size();
  if (n < 2) throw ValidationError("periodogram needs at least 2 samples");
  std::vector<double> in(samples.begin(), samples.end());
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> p(out.size());
  const double scale = dt / static_cast<double>(n);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const bool edge = (k == 0) || (2 * k == n);
    p[k] = (edge ? 1.0 : 2.0) * std::norm(out[k]) * scale;
  }
  return p;
}

EnsembleResult simulate_secular_heating(const IonSpecies& species, double omega, double s_e,
                                        const SecularOracleOptions& o) {
  species.validate();
  if (!(omega > 0.0)) throw ValidationError("secular frequency must be positive");
  if (!(s_e >= 0.0)) throw ValidationError("field noise PSD must be >= 0");
  if (o.n_realizations < 2) throw ValidationError("need at least 2 realizations");
  const double period = kTwoPi / omega;
  if (!(o.duration >= 100.0 * period * (1.0 - 1e-12))) throw ValidationError("duration must cover at least 100 secular periods");
  const double dt = o.step > 0.0 ? o.step : period / 40.0;
  if (dt > period / 20.0) throw ValidationError("step too coarse: must be at most 1/20 of the secular period");
  const double f = omega / kTwoPi;
  const auto band = o.band_hz.value_or(std::make_pair(0.8 * f, 1.2 * f));
  const NoiseBand nb{band.first, band.second, s_e};

  const std::size_t n_steps = static_cast<std::size_t>(std::ceil(o.duration / dt));
  const std::size_t record_every = std::max<std::size_t>(1, n_steps / 2000);
  std::vector<double> time;
  for (std::size_t s = 0; s <= n_steps; s += record_every) time.push_back(static_cast<double>(s) * dt);
  const std::size_t n_noise = even_length(2 * (n_steps + 1));

  const double qm = species.charge / species.mass;
  const double c = std::cos(omega * dt), s = std::sin(omega * dt);
  const double m = species.mass;
  auto run = [&](int i) {
    std::vector<double> energy;
    energy.reserve(time.size());
    std::vector<double> e_noise(n_noise, 0.0);
    if (s_e > 0.0) e_noise = synthesize_noise(std::span<const NoiseBand>(&nb, 1), dt, n_noise, derive_seed(o.seed, i)).samples;
    double x = o.initial_amplitude, v = 0.0;
    for (std::size_t n = 0; n <= n_steps; ++n) {
      if (n % record_every == 0) energy.push_back(0.5 * m * (v * v + omega * omega * x * x));
      if (n == n_steps) break;
      v += 0.5 * dt * qm * e_noise[n];
      const double xn = x * c + v / omega * s;
      v = -x * omega * s + v * c;
      x = xn;
      v += 0.5 * dt * qm * e_noise[n + 1];
    }
    return energy;
  };
  EnsembleResult r = reduce_ensemble(o.n_realizations, o.threads, kHbar * omega, time, run);
  const bool in_band = f >= band.first && f <= band.second;
  r.predicted_rate = in_band ? species.charge * species.charge * s_e / (4.0 * species.mass * kHbar * omega) : 0.0;
  return r;
}

namespace {

class RfDynamics {
 public:
  RfDynamics(const ElectrodeLayout& layout, const TrapConfig& cfg) : cfg_(cfg) {
    rf_.add_group(layout, layout.rf_group(), 1.0);
    for (const auto& [g, v] : cfg.dc_voltages) {
      if (v != 0.0) dc_.add_group(layout, g, v);
    }
    qm_ = cfg.species.charge / cfg.species.mass;
  }
  Vec3 accel(const Vec3& r, double rf_voltage) const {
    if (!(r.z() > 0.0)) throw NumericalError("ion trajectory hit the electrode plane (unstable trajectory)");
    return qm_ * (rf_voltage * rf_.field(r) + dc_.field(r) + cfg_.stray_field);
  }
  Vec3 rf_basis(const Vec3& r) const { return rf_.field(r); }
  double qm() const { return qm_; }

 private:
  TrapConfig cfg_;
  WeightedRects rf_, dc_;
  double qm_;
};

struct PeriodAverages {
  std::vector<Vec3> r, v;
};

// Integrates n_periods RF periods; voltage(n) is the RF electrode voltage at step n.
template <typename Voltage>
PeriodAverages integrate_rf(const RfDynamics& dyn, Vec3 r, Vec3 v, int steps_per_period, int n_periods,
                            double dt, const Voltage& voltage, double escape_scale, const Vec3& center) {
  PeriodAverages out;
  out.r.reserve(n_periods + 1);
  out.v.reserve(n_periods + 1);
  Vec3 a = dyn.accel(r, voltage(0));
  std::size_t n = 0;
  Vec3 sr = Vec3::Zero(), sv = Vec3::Zero();
  for (int p = 0; p < n_periods; ++p) {
    sr.setZero();
    sv.setZero();
    for (int k = 0; k < steps_per_period; ++k, ++n) {
      // Trapezoid average over the period.
      const double w = (k == 0) ? 0.5 : 1.0;
      sr += w * r;
      sv += w * v;
      verlet_step(r, v, a, 0.0, dt, [&](const Vec3& x, double) { return dyn.accel(x, voltage(n + 1)); });
    }
    sr += 0.5 * r;
    sv += 0.5 * v;
    out.r.push_back(sr / steps_per_period);
    out.v.push_back(sv / steps_per_period);
    if (!((r - center).norm() < escape_scale)) {
      throw NumericalError("ion trajectory left the trap (unstable trajectory, q parameter too large?)");
    }
  }
  return out;
}

struct RfSetup {
  double dt;
  int steps_per_period;
  int n_periods;
  Vec3 r0, v0;
};

RfSetup rf_setup(const RfDynamics& dyn, const TrapConfig& cfg, const Vec3& position, double duration,
                 int steps_per_period) {
  if (steps_per_period < 50) throw ValidationError("RF-resolved runs need at least 50 steps per RF period");
  if (!(duration > 0.0)) throw ValidationError("duration must be positive");
  RfSetup s;
  const double t_rf = kTwoPi / cfg.rf_omega;
  s.steps_per_period = steps_per_period;
  s.dt = t_rf / steps_per_period;
  s.n_periods = static_cast<int>(std::ceil(duration / t_rf));
  // Start on the micromotion orbit: x_mm(t) = -q V0 E_b cos(Omega t) / (m Omega^2).
  s.r0 = position - dyn.qm() * cfg.rf_amplitude * dyn.rf_basis(position) / (cfg.rf_omega * cfg.rf_omega);
  s.v0 = Vec3::Zero();
  return s;
}

}  // namespace

DisplacedTrap displace_from_null(const ElectrodeLayout& layout, const TrapConfig& config,
                                 const Vec3& displacement) {
  TrapConfig clean = config;
  const auto base = find_equilibrium(layout, clean);
  DisplacedTrap out;
  out.null = find_rf_null(layout, base.position);
  const Vec3 target = out.null + displacement;
  const TrapModel model(layout, config);
  out.config = config;
  out.config.stray_field += model.energy_gradient(target) / config.species.charge;
  out.op = refine_equilibrium(layout, out.config, target);
  out.axial_gradient = out.op.grad_e0_sq[TrapOperatingPoint::kAxial];
  return out;
}

EnsembleResult simulate_rf_noise_heating(const ElectrodeLayout& layout, const TrapConfig& config,
                                         const Vec3& displacement, double s_v_sideband,
                                         const RfOracleOptions& o) {
  if (!(s_v_sideband >= 0.0)) throw ValidationError("RF noise PSD must be >= 0");
  if (o.n_realizations < 2) throw ValidationError("need at least 2 realizations");
  const DisplacedTrap trap = displace_from_null(layout, config, displacement);
  const TrapConfig& cfg = trap.config;
  const RfDynamics dyn(layout, cfg);
  const RfSetup s = rf_setup(dyn, cfg, trap.op.position, o.duration, o.steps_per_rf_period);
  const double omega = trap.op.secular_omega[TrapOperatingPoint::kAxial];
  const Vec3 axis = trap.op.axis(TrapOperatingPoint::kAxial);
  const double f_rf = cfg.rf_omega / kTwoPi, f_sec = omega / kTwoPi;
  const double half_band = o.band_fraction * f_sec;
  std::vector<NoiseBand> bands{{f_rf + f_sec - half_band, f_rf + f_sec + half_band, s_v_sideband}};
  if (o.both_sidebands) bands.push_back({f_rf - f_sec - half_band, f_rf - f_sec + half_band, s_v_sideband});

  const std::size_t n_steps = static_cast<std::size_t>(s.n_periods) * s.steps_per_period;
  const std::size_t n_noise = even_length(2 * (n_steps + 1));
  std::vector<double> carrier(n_steps + 1);
  for (std::size_t n = 0; n <= n_steps; ++n) {
    carrier[n] = cfg.rf_amplitude * std::cos(cfg.rf_omega * static_cast<double>(n) * s.dt);
  }
  const double escape = 0.5 * layout.ion_height_hint();
  const PeriodAverages ref = integrate_rf(
      dyn, s.r0, s.v0, s.steps_per_period, s.n_periods, s.dt, [&](std::size_t n) { return carrier[n]; },
      escape, trap.op.position);
  std::vector<double> time(s.n_periods);
  for (int p = 0; p < s.n_periods; ++p) time[p] = (p + 0.5) * s.steps_per_period * s.dt;

  const double m = cfg.species.mass;
  auto run = [&](int i) {
    const auto noise = synthesize_noise(bands, s.dt, n_noise, derive_seed(o.seed, i)).samples;
    const PeriodAverages avg = integrate_rf(
        dyn, s.r0, s.v0, s.steps_per_period, s.n_periods, s.dt,
        [&](std::size_t n) { return carrier[n] + noise[n]; }, escape, trap.op.position);
    std::vector<double> energy(s.n_periods);
    for (int p = 0; p < s.n_periods; ++p) {
      const double y = (avg.r[p] - ref.r[p]).dot(axis);
      const double u = (avg.v[p] - ref.v[p]).dot(axis);
      energy[p] = 0.5 * m * (u * u + omega * omega * y * y);
    }
    return energy;
  };
  EnsembleResult r = reduce_ensemble(o.n_realizations, o.threads, kHbar * omega, time, run);
  const double s_total = o.both_sidebands ? 2.0 * s_v_sideband : s_v_sideband;
  r.predicted_rate = heating_rate_rf(cfg.species, omega, cfg.rf_omega, cfg.rf_amplitude, trap.axial_gradient, s_total);
  return r;
}

DriveResponse simulate_drive_response(const ElectrodeLayout& layout, const TrapConfig& config,
                                      double drive_omega, double drive_amplitude, double duration,
                                      const DriveResponseOptions& o) {
  if (!(drive_omega > 0.0)) throw ValidationError("drive frequency must be positive");
  if (!(drive_amplitude >= 0.0)) throw ValidationError("drive amplitude must be >= 0");
  DriveResponse out;
  out.op = find_equilibrium(layout, config);
  const RfDynamics dyn(layout, config);
  RfSetup s = rf_setup(dyn, config, out.op.position, duration, o.steps_per_rf_period);
  const Vec3 axis = out.op.axis(TrapOperatingPoint::kAxial);
  const double omega = out.op.secular_omega[TrapOperatingPoint::kAxial];
  s.r0 += o.initial_axial_amplitude * axis;
  const double escape = 0.5 * layout.ion_height_hint();
  auto carrier = [&](std::size_t n) {
    return config.rf_amplitude * std::cos(config.rf_omega * static_cast<double>(n) * s.dt);
  };
  const PeriodAverages ref =
      integrate_rf(dyn, s.r0, s.v0, s.steps_per_period, s.n_periods, s.dt, carrier, escape, out.op.position);
  const PeriodAverages drv = integrate_rf(
      dyn, s.r0, s.v0, s.steps_per_period, s.n_periods, s.dt,
      [&](std::size_t n) {
        return carrier(n) + drive_amplitude * std::cos(drive_omega * static_cast<double>(n) * s.dt);
      },
      escape, out.op.position);
  for (int p = 0; p < s.n_periods; ++p) {
    const double y = (drv.r[p] - ref.r[p]).dot(axis);
    const double u = (drv.v[p] - ref.v[p]).dot(axis);
    const double amp = std::hypot(y, u / omega);
    out.max_amplitude = std::max(out.max_amplitude, amp);
    out.final_amplitude = amp;
  }
  return out;
}

}  // namespace ionheat
