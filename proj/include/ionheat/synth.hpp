#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ionheat/fit.hpp"

namespace ionheat {

// n = R / (1 - R) with R = red / blue.
double sideband_nbar(double red_amplitude, double blue_amplitude);
// Inverse map R = n / (n + 1).
double sideband_ratio(double nbar);

struct MeasurementModel {
  int n_shots = 2000;            // per sideband and delay
  std::vector<double> delays_s;  // empty: adaptive
  int n_delays = 4;              // adaptive delays: 0 .. t_max in equal steps
  double target_nbar = 1.0;      // adaptive: heating added by the last delay
  double initial_nbar = 0.05;    // after cooling
  double blue_amplitude = 0.5;   // blue sideband excitation probability
};

struct ExperimentPlan {
  Regime regime = Regime::kDc;
  std::vector<double> injected_psd;  // V^2/Hz, ascending
  double residual_psd = 0.0;         // V^2/Hz always present on the electrode
  double background = 0.0;           // quanta/s
  double parameter = 0.0;            // D (m) for dc, d E0^2/d i (V^2/m^3) for rf
  FitContext context;
  MeasurementModel measurement;
  double psd_relative_sigma = 0.05;  // calibration error of the reported PSD

  void validate() const;
  double slope() const;  // quanta/s per V^2/Hz
  double true_rate(double total_psd) const { return background + slope() * total_psd; }
};

struct SyntheticExperiment {
  HeatingDataset dataset;
  std::vector<double> true_psd;
  std::vector<double> true_rate;
};

// Rate measured by sideband thermometry at the plan delays: binomial shot noise on
// both sidebands, n from the ratio, unweighted line fit of n(t). Sigma is the
// delta-method shot-noise error of the design, evaluated at the true n(t).
HeatingPoint measure_rate(const MeasurementModel& m, double true_rate, std::uint64_t seed);

SyntheticExperiment generate_dataset(const ExperimentPlan& plan, std::uint64_t seed);

// Plain key = value sidecar with the generating truth.
void write_truth(std::ostream& out, const ExperimentPlan& plan, const SyntheticExperiment& exp,
                 std::uint64_t seed);

}  // namespace ionheat
