#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"
#include "ionheat/heating.hpp"
#include "ionheat/noise.hpp"
#include "ionheat/oracle.hpp"
#include "test_support.hpp"

using namespace ionheat;
using namespace ionheat::testing;
using constants::kTwoPi;

namespace {

const double kOmega = kTwoPi * 1e6;

SecularOracleOptions secular_options(int n, int periods) {
  SecularOracleOptions o;
  o.duration = periods * kTwoPi / kOmega;
  o.n_realizations = n;
  o.threads = 1;
  return o;
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST(Oracle, SynthesizedPsdMatchesTarget) {
  const double dt = 1e-7;
  const std::size_t n = 4096;
  const NoiseBand band{100e3, 300e3, 2e-12};
  std::vector<double> mean(n / 2 + 1, 0.0);
  const int runs = 50;
  for (int r = 0; r < runs; ++r) {
    const auto noise = synthesize_noise(std::span<const NoiseBand>(&band, 1), dt, n, 100 + r);
    const auto p = periodogram(noise.samples, dt);
    for (std::size_t k = 0; k < p.size(); ++k) mean[k] += p[k] / runs;
  }
  const double df = 1.0 / (n * dt);
  double in_band = 0.0, out_band = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const double f = k * df;
    if (f >= band.f_lo_hz && f <= band.f_hi_hz) {
      in_band += mean[k];
      ++count;
    } else {
      out_band = std::max(out_band, mean[k]);
    }
  }
  EXPECT_NEAR(in_band / count, band.psd, 0.05 * band.psd);
  EXPECT_LT(out_band, 1e-20 * band.psd);
}

TEST(Oracle, NoiseDeterministicForSeed) {
  const NoiseBand band{1e3, 2e3, 1.0};
  const auto a = synthesize_noise(std::span<const NoiseBand>(&band, 1), 1e-5, 1000, 9);
  const auto b = synthesize_noise(std::span<const NoiseBand>(&band, 1), 1e-5, 1000, 9);
  const auto c = synthesize_noise(std::span<const NoiseBand>(&band, 1), 1e-5, 1000, 10);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
}

TEST(Oracle, NoiseBandAboveNyquistRejected) {
  const NoiseBand band{1e3, 6e4, 1.0};
  EXPECT_THROW(synthesize_noise(std::span<const NoiseBand>(&band, 1), 1e-5, 1000, 1), ValidationError);
}

TEST(Oracle, SecularRateMatchesClosedForm) {
  const auto r = simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, secular_options(400, 200));
  EXPECT_NEAR(r.predicted_rate, 66.35, 0.01);
  EXPECT_NEAR(r.rate, r.predicted_rate, 3.0 * r.statistical_sigma);
  EXPECT_GT(r.linearity, 0.95);
}

TEST(Oracle, SecularEnergyConservedWithoutNoise) {
  auto o = secular_options(2, 10000);
  o.initial_amplitude = 50e-9;
  const auto r = simulate_secular_heating(IonSpecies::sr88(), kOmega, 0.0, o);
  const double e0 = r.trace_mean_quanta.front();
  ASSERT_GT(e0, 0.0);
  for (double e : r.trace_mean_quanta) EXPECT_NEAR(e, e0, 1e-8 * e0);
  EXPECT_EQ(r.predicted_rate, 0.0);
}

TEST(Oracle, SecularNoHeatingWhenBandExcludesSecularFrequency) {
  auto o = secular_options(200, 200);
  o.band_hz = std::make_pair(0.05e6, 0.5e6);
  const auto r = simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, o);
  EXPECT_EQ(r.predicted_rate, 0.0);
  EXPECT_LT(std::abs(r.rate), std::max(3.0 * r.statistical_sigma, 0.01 * 66.35));
}

TEST(Oracle, SecularSigmaScalesAsInverseRootN) {
  const auto a = simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, secular_options(100, 100));
  const auto b = simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, secular_options(400, 100));
  EXPECT_NEAR(a.statistical_sigma / b.statistical_sigma, 2.0, 0.5);
}

TEST(Oracle, SecularSeedBatchesAgree) {
  auto o = secular_options(200, 100);
  const auto a = simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, o);
  o.seed = 2;
  const auto b = simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, o);
  // 1% critical value for two samples of 200.
  EXPECT_LT(ks_statistic(a.realization_rates, b.realization_rates), 1.63 * std::sqrt(2.0 / 200));
  EXPECT_NE(a.rate, b.rate);
}

TEST(Oracle, ResultIndependentOfThreadCount) {
  auto o = secular_options(40, 100);
  const auto a = simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, o);
  o.threads = 3;
  const auto b = simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, o);
  EXPECT_EQ(a.rate, b.rate);
  EXPECT_EQ(a.statistical_sigma, b.statistical_sigma);
  EXPECT_EQ(a.trace_mean_quanta, b.trace_mean_quanta);
}

TEST(Oracle, SecularRejectsBadSettings) {
  auto o = secular_options(10, 100);
  o.step = 0.1 * kTwoPi / kOmega;
  EXPECT_THROW(simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, o), ValidationError);
  o = secular_options(10, 50);
  EXPECT_THROW(simulate_secular_heating(IonSpecies::sr88(), kOmega, 1e-12, o), ValidationError);
}

TEST(Oracle, VerletIsSecondOrder) {
  const auto energy_drift = [](int steps_per_period) {
    const double w = 1.0;
    const double dt = kTwoPi / w / steps_per_period;
    double x = 1.0, v = 0.0, a = -w * w * x;
    double worst = 0.0;
    for (int n = 0; n < 100 * steps_per_period; ++n) {
      verlet_step(x, v, a, n * dt, dt, [&](double y, double) { return -w * w * y; });
      worst = std::max(worst, std::abs(0.5 * (v * v + w * w * x * x) - 0.5));
    }
    return worst;
  };
  EXPECT_NEAR(energy_drift(64) / energy_drift(128), 4.0, 0.2);
}

TEST(Oracle, RfNoiseHeatingMatchesPseudopotentialTerm) {
  const auto layout = bundled_layout();
  const auto cfg = tuned_config(layout);
  RfOracleOptions o;
  o.n_realizations = 24;
  o.threads = 1;
  const auto trap = displace_from_null(layout, cfg, {0, 0, 0.5e-6});
  EXPECT_NEAR((trap.op.position - trap.null).norm(), 0.5e-6, 1e-9);
  o.duration = 100 * kTwoPi / trap.op.secular_omega[TrapOperatingPoint::kAxial];
  const auto r = simulate_rf_noise_heating(layout, cfg, {0, 0, 0.5e-6}, 1e-12, o);
  EXPECT_GT(r.predicted_rate, 0.0);
  EXPECT_LT(std::abs(r.rate - r.predicted_rate), 0.1 * r.predicted_rate + 3.0 * r.statistical_sigma);
}

TEST(Oracle, RfNoiseAtNullDoesNotHeat) {
  const auto layout = bundled_layout();
  const auto cfg = tuned_config(layout);
  const auto displaced = displace_from_null(layout, cfg, {0, 0, 0.5e-6});
  RfOracleOptions o;
  o.n_realizations = 8;
  o.threads = 1;
  o.duration = 100 * kTwoPi / displaced.op.secular_omega[TrapOperatingPoint::kAxial];
  const auto at_null = simulate_rf_noise_heating(layout, cfg, Vec3::Zero(), 1e-12, o);
  const double displaced_rate =
      heating_rate_rf(cfg.species, displaced.op.secular_omega[TrapOperatingPoint::kAxial], cfg.rf_omega,
                      cfg.rf_amplitude, displaced.axial_gradient, 2e-12);
  EXPECT_LT(at_null.predicted_rate, 1e-3 * displaced_rate);
  EXPECT_LT(std::abs(at_null.rate), std::max(3.0 * at_null.statistical_sigma, 1e-3 * displaced_rate));
}

TEST(Oracle, UnstableTrajectoryAborts) {
  const auto layout = bundled_layout();
  auto cfg = tuned_config(layout);
  cfg.rf_amplitude = 2000.0;
  RfOracleOptions o;
  o.n_realizations = 2;
  o.duration = 2e-6;
  o.threads = 1;
  try {
    simulate_rf_noise_heating(layout, cfg, Vec3::Zero(), 1e-12, o);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("unstable"), std::string::npos) << e.what();
  }
}

TEST(Oracle, RfOracleRejectsCoarseStep) {
  const auto layout = bundled_layout();
  const auto cfg = tuned_config(layout);
  RfOracleOptions o;
  o.steps_per_rf_period = 32;
  o.duration = 1e-5;
  EXPECT_THROW(simulate_rf_noise_heating(layout, cfg, Vec3::Zero(), 1e-12, o), ValidationError);
}

TEST(Oracle, DriveResponsePeaksAtSidebandResonance) {
  const auto layout = short_rail_layout();
  auto cfg = tuned_config(layout);
  cfg.stray_field = {0, 0, 420};
  const auto op = find_equilibrium(layout, cfg);
  const double w = op.secular_omega[TrapOperatingPoint::kAxial];
  const double duration = 100 * kTwoPi / w;
  std::vector<double> amp;
  for (double detuning : {-0.04, -0.02, 0.0, 0.02, 0.04}) {
    amp.push_back(simulate_drive_response(layout, cfg, cfg.rf_omega + (1.0 + detuning) * w, 0.01, duration).max_amplitude);
  }
  EXPECT_EQ(std::max_element(amp.begin(), amp.end()) - amp.begin(), 2);
  EXPECT_GT(amp[2], 5.0 * std::max(amp[0], amp[4]));
}

TEST(Oracle, SecondHarmonicDriveNeedsThirtyDbMore) {
  const auto layout = short_rail_layout();
  auto cfg = tuned_config(layout);
  cfg.stray_field = {0, 0, 420};
  const auto op = find_equilibrium(layout, cfg);
  const double w = op.secular_omega[TrapOperatingPoint::kAxial];
  const double duration = 100 * kTwoPi / w;
  const double a = 0.01;
  const double first = simulate_drive_response(layout, cfg, cfg.rf_omega + w, a, duration).max_amplitude;
  const double second =
      simulate_drive_response(layout, cfg, cfg.rf_omega + 2 * w, a * std::pow(10.0, 30.0 / 20.0), duration).max_amplitude;
  EXPECT_LT(second, first);
}

TEST(Oracle, CompensatedTrapIgnoresStrongDrive) {
  const auto layout = symmetric_layout();
  const auto cfg = tuned_config(layout);
  const auto op = find_equilibrium(layout, cfg);
  const double w = op.secular_omega[TrapOperatingPoint::kAxial];
  EXPECT_LT(std::abs(op.grad_e0_sq[TrapOperatingPoint::kAxial]), 1e3);
  // Equal source power behind the resonator arrives attenuated by its Lorentzian.
  const ResonatorParams helical{170.0, 500e-9, cfg.rf_omega};
  const double amplitude =
      cfg.rf_amplitude * std::sqrt(resonator_transfer(helical, w) / resonator_transfer(helical, 0.0));
  const auto r = simulate_drive_response(layout, cfg, cfg.rf_omega + w, amplitude, 100 * kTwoPi / w);
  EXPECT_LT(r.max_amplitude, 1e-12);
}
