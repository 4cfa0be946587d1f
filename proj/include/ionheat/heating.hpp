#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ionheat/species.hpp"

namespace ionheat {

struct FitResult;

struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
};

// Electric-field noise coupling from electrode voltage noise:
// rate = q^2 / (4 m hbar w) * S_V / D^2.
double dc_coupling(const IonSpecies& species, double omega, double distance);  // quanta/s per V^2/Hz

struct DcContribution {
  double s_v = 0.0;       // V^2/Hz at the secular frequency
  double distance = 0.0;  // characteristic distance D, m
};
double heating_rate_dc(const IonSpecies& species, double omega, std::span<const DcContribution> contributions);
double heating_rate_dc(const IonSpecies& species, double omega, double s_v, double distance);

// Pseudopotential-gradient coupling of RF amplitude noise:
// rate = q^4 / (16 m^3 hbar Omega^4 w) * grad^2 * S_V_RF / V0^2,
// with S_V_RF the sum of the noise at Omega - w and Omega + w.
double rf_coupling(const IonSpecies& species, double omega, double rf_omega, double rf_amplitude,
                   double gradient);  // quanta/s per V^2/Hz
double heating_rate_rf(const IonSpecies& species, double omega, double rf_omega, double rf_amplitude,
                       double gradient, double s_v_rf);
// V0 at which the RF term yields `rate` for the given gradient and noise.
double solve_rf_amplitude(const IonSpecies& species, double omega, double rf_omega, double gradient,
                          double s_v_rf, double rate);

// slope * residual_psd with first-order propagation of the slope and PSD errors.
Estimate intrinsic_contribution(const FitResult& fit, double residual_psd, double residual_sigma = 0.0);

enum class Correlation { kUncorrelated, kSymmetricInPhase, kWorstCaseCoherent };
std::string_view to_string(Correlation c);
Correlation parse_correlation(std::string_view s);

// n equal groups: n * rate, 0, or n^2 * rate.
double combine_groups(double per_group_rate, int n_groups, Correlation correlation);
// Unequal groups: sum, 0, or (sum of sqrt(rate))^2.
double combine_rates(std::span<const double> rates, Correlation correlation);

enum class SourceKind { kDcGroup, kRfSidebands, kBackground };
std::string_view to_string(SourceKind k);

struct HeatingBudgetEntry {
  SourceKind kind = SourceKind::kDcGroup;
  std::string label;
  double rate = 0.0;         // quanta/s
  double uncertainty = 0.0;  // quanta/s
};

class HeatingBudget {
 public:
  void add(HeatingBudgetEntry entry);
  const std::vector<HeatingBudgetEntry>& entries() const { return entries_; }
  double background() const;
  // Background plus all technical entries, with DC groups combined per `correlation`.
  Estimate total(Correlation correlation = Correlation::kUncorrelated) const;

 private:
  std::vector<HeatingBudgetEntry> entries_;
};

// Normal-input Monte-Carlo propagation: mean and standard deviation of f over
// `n` draws. Inputs with non-negative `positive` flags are redrawn until > 0.
Estimate propagate_monte_carlo(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> means, std::span<const double> sigmas,
                               int n, std::uint64_t seed, bool positive_inputs = true);

}  // namespace ionheat
