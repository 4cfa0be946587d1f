#include "ionheat/heating.hpp"

#include <cmath>
#include <random>

#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"
#include "ionheat/fit.hpp"

namespace ionheat {

using constants::kHbar;

double dc_coupling(const IonSpecies& species, double omega, double distance) {
  species.validate();
  if (!(omega > 0.0)) throw ValidationError("secular frequency must be positive");
  if (!(distance > 0.0)) throw ValidationError("characteristic distance must be positive");
  const double q = species.charge;
  return q * q / (4.0 * species.mass * kHbar * omega * distance * distance);
}

double heating_rate_dc(const IonSpecies& species, double omega,
                       std::span<const DcContribution> contributions) {
  double rate = 0.0;
  for (const auto& c : contributions) {
    if (!(c.s_v >= 0.0)) throw ValidationError("voltage noise PSD must be >= 0");
    rate += dc_coupling(species, omega, c.distance) * c.s_v;
  }
  return rate;
}

double heating_rate_dc(const IonSpecies& species, double omega, double s_v, double distance) {
  const DcContribution c{s_v, distance};
  return heating_rate_dc(species, omega, std::span<const DcContribution>(&c, 1));
}

double rf_coupling(const IonSpecies& species, double omega, double rf_omega, double rf_amplitude,
                   double gradient) {
  species.validate();
  if (!(omega > 0.0)) throw ValidationError("secular frequency must be positive");
  if (!(rf_omega > 0.0)) throw ValidationError("RF frequency must be positive");
  if (!(rf_amplitude > 0.0)) throw ValidationError("RF amplitude must be positive");
  const double q2 = species.charge * species.charge;
  const double m = species.mass;
  const double w4 = std::pow(rf_omega, 4);
  return q2 * q2 * gradient * gradient / (16.0 * m * m * m * kHbar * w4 * omega * rf_amplitude * rf_amplitude);
}

double heating_rate_rf(const IonSpecies& species, double omega, double rf_omega, double rf_amplitude,
                       double gradient, double s_v_rf) {
  if (!(s_v_rf >= 0.0)) throw ValidationError("RF noise PSD must be >= 0");
  return rf_coupling(species, omega, rf_omega, rf_amplitude, gradient) * s_v_rf;
}

double solve_rf_amplitude(const IonSpecies& species, double omega, double rf_omega, double gradient,
                          double s_v_rf, double rate) {
  if (!(rate > 0.0)) throw ValidationError("rate must be positive");
  // The rate scales as 1 / V0^2; evaluate at 1 V and rescale.
  const double at_one_volt = heating_rate_rf(species, omega, rf_omega, 1.0, gradient, s_v_rf);
  return std::sqrt(at_one_volt / rate);
}

Estimate intrinsic_contribution(const FitResult& fit, double residual_psd, double residual_sigma) {
  if (!std::isfinite(fit.slope) || !std::isfinite(fit.slope_sigma)) {
    throw ValidationError("fit has no converged slope");
  }
  if (!(residual_psd >= 0.0) || !(residual_sigma >= 0.0)) {
    throw ValidationError("residual PSD and its uncertainty must be >= 0");
  }
  const double slope = std::max(fit.slope, 0.0);
  const double value = slope * residual_psd;
  const double sigma = std::hypot(fit.slope_sigma * residual_psd, slope * residual_sigma);
  return {value, sigma};
}

std::string_view to_string(Correlation c) {
  switch (c) {
    case Correlation::kUncorrelated: return "uncorrelated";
    case Correlation::kSymmetricInPhase: return "symmetric_in_phase";
    case Correlation::kWorstCaseCoherent: return "worst_case_coherent";
  }
  return "";
}

Correlation parse_correlation(std::string_view s) {
  if (s == "uncorrelated") return Correlation::kUncorrelated;
  if (s == "symmetric_in_phase") return Correlation::kSymmetricInPhase;
  if (s == "worst_case_coherent") return Correlation::kWorstCaseCoherent;
  throw ParseError("unknown correlation '" + std::string(s) + "'");
}

double combine_groups(double per_group_rate, int n_groups, Correlation correlation) {
  if (!(per_group_rate >= 0.0)) throw ValidationError("per-group rate must be >= 0");
  if (n_groups < 1) throw ValidationError("n_groups must be >= 1");
  const double n = n_groups;
  switch (correlation) {
    case Correlation::kUncorrelated: return n * per_group_rate;
    case Correlation::kSymmetricInPhase: return 0.0;
    case Correlation::kWorstCaseCoherent: return n * n * per_group_rate;
  }
  return 0.0;
}

double combine_rates(std::span<const double> rates, Correlation correlation) {
  double sum = 0.0, amp = 0.0;
  for (double r : rates) {
    if (!(r >= 0.0)) throw ValidationError("rates must be >= 0");
    sum += r;
    amp += std::sqrt(r);
  }
  switch (correlation) {
    case Correlation::kUncorrelated: return sum;
    case Correlation::kSymmetricInPhase: return 0.0;
    case Correlation::kWorstCaseCoherent: return amp * amp;
  }
  return 0.0;
}

std::string_view to_string(SourceKind k) {
  switch (k) {
    case SourceKind::kDcGroup: return "dc_group";
    case SourceKind::kRfSidebands: return "rf_sidebands";
    case SourceKind::kBackground: return "background";
  }
  return "";
}

void HeatingBudget::add(HeatingBudgetEntry entry) {
  if (!(entry.rate >= 0.0)) throw ValidationError("budget entry '" + entry.label + "' has a negative rate");
  if (!(entry.uncertainty >= 0.0)) throw ValidationError("budget entry '" + entry.label + "' has a negative uncertainty");
  entries_.push_back(std::move(entry));
}

double HeatingBudget::background() const {
  double b = 0.0;
  for (const auto& e : entries_) {
    if (e.kind == SourceKind::kBackground) b += e.rate;
  }
  return b;
}

Estimate HeatingBudget::total(Correlation correlation) const {
  std::vector<double> dc_rates;
  double dc_var = 0.0;
  Estimate out;
  double var = 0.0;
  for (const auto& e : entries_) {
    if (e.kind == SourceKind::kDcGroup) {
      dc_rates.push_back(e.rate);
      dc_var += e.uncertainty * e.uncertainty;
    } else {
      out.value += e.rate;
      var += e.uncertainty * e.uncertainty;
    }
  }
  out.value += combine_rates(dc_rates, correlation);
  const double n = static_cast<double>(dc_rates.size());
  switch (correlation) {
    case Correlation::kUncorrelated: var += dc_var; break;
    case Correlation::kSymmetricInPhase: break;
    // Fully correlated groups: amplitudes add, and so do the relative errors.
    case Correlation::kWorstCaseCoherent: var += n * n * dc_var; break;
  }
  out.sigma = std::sqrt(var);
  return out;
}

Estimate propagate_monte_carlo(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> means, std::span<const double> sigmas, int n,
                               std::uint64_t seed, bool positive_inputs) {
  if (means.size() != sigmas.size()) throw ValidationError("means and sigmas differ in length");
  if (n < 2) throw ValidationError("Monte-Carlo propagation needs at least 2 draws");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(means.size());
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      do {
        x[k] = means[k] + sigmas[k] * normal(rng);
      } while (positive_inputs && means[k] > 0.0 && !(x[k] > 0.0));
    }
    const double y = f(x);
    const double delta = y - mean;
    mean += delta / (i + 1);
    m2 += delta * (y - mean);
  }
  return {mean, std::sqrt(m2 / (n - 1))};
}

}  // namespace ionheat
