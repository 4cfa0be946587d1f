#include "ionheat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "ionheat/errors.hpp"
#include "ionheat/heating.hpp"
#include "ionheat/random.hpp"

namespace ionheat {

double sideband_nbar(double red, double blue) {
  if (!(blue > 0.0)) throw ValidationError("blue sideband amplitude must be positive");
  if (!(red >= 0.0)) throw ValidationError("red sideband amplitude must be >= 0");
  if (red >= blue) throw ValidationError("red sideband amplitude must be below the blue (unphysical ratio)");
  const double r = red / blue;
  return r / (1.0 - r);
}

double sideband_ratio(double nbar) {
  if (!(nbar >= 0.0)) throw ValidationError("nbar must be >= 0");
  return nbar / (nbar + 1.0);
}

void ExperimentPlan::validate() const {
  context.species.validate();
  if (!(context.omega > 0.0)) throw ValidationError("plan needs a positive secular frequency");
  if (regime == Regime::kRf && (!(context.rf_omega > 0.0) || !(context.rf_amplitude > 0.0))) {
    throw ValidationError("rf plan needs positive rf_omega and rf_amplitude");
  }
  if (injected_psd.empty()) throw ValidationError("plan has no injection levels");
  if (!std::is_sorted(injected_psd.begin(), injected_psd.end())) {
    throw ValidationError("plan injection levels must be sorted ascending");
  }
  for (double s : injected_psd) {
    if (!(s >= 0.0)) throw ValidationError("plan injection levels must be >= 0");
  }
  if (!(residual_psd >= 0.0)) throw ValidationError("residual PSD must be >= 0");
  if (!(background >= 0.0)) throw ValidationError("background rate must be >= 0");
  if (regime == Regime::kDc && !(parameter > 0.0)) throw ValidationError("dc plan needs D > 0");
  if (regime == Regime::kRf && !(parameter >= 0.0)) throw ValidationError("rf plan needs gradient >= 0");
  if (measurement.n_shots < 1) throw ValidationError("n_shots must be >= 1");
  if (!(psd_relative_sigma >= 0.0)) throw ValidationError("psd_relative_sigma must be >= 0");
  const auto& m = measurement;
  if (m.delays_s.empty()) {
    if (m.n_delays < 2) throw ValidationError("need at least 2 delays");
    if (!(m.target_nbar > 0.0)) throw ValidationError("target_nbar must be positive");
  } else {
    if (m.delays_s.size() < 2) throw ValidationError("need at least 2 delays");
    for (double t : m.delays_s) {
      if (!(t >= 0.0)) throw ValidationError("delays must be >= 0");
    }
  }
  if (!(m.initial_nbar >= 0.0)) throw ValidationError("initial_nbar must be >= 0");
  if (!(m.blue_amplitude > 0.0 && m.blue_amplitude <= 1.0)) throw ValidationError("blue_amplitude must be in (0, 1]");
}

double ExperimentPlan::slope() const {
  if (regime == Regime::kDc) return dc_coupling(context.species, context.omega, parameter);
  return rf_coupling(context.species, context.omega, context.rf_omega, context.rf_amplitude, parameter);
}

HeatingPoint measure_rate(const MeasurementModel& m, double true_rate, std::uint64_t seed) {
  std::vector<double> t = m.delays_s;
  if (t.empty()) {
    const double t_max = m.target_nbar / std::max(true_rate, 1e-12);
    for (int k = 0; k < m.n_delays; ++k) t.push_back(t_max * k / (m.n_delays - 1));
  }
  std::mt19937_64 rng(seed);
  const auto n_shots = static_cast<long long>(m.n_shots);
  const double pb = m.blue_amplitude;
  std::vector<double> nbar(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double r = sideband_ratio(m.initial_nbar + true_rate * t[i]);
    std::binomial_distribution<long long> red_dist(n_shots, pb * r), blue_dist(n_shots, pb);
    const double red = static_cast<double>(red_dist(rng));
    const double blue = std::max<double>(1.0, static_cast<double>(blue_dist(rng)));
    // A shot-noise excursion with red >= blue is capped just below the blue count.
    const double ratio = std::min(red / blue, 1.0 - 1.0 / (blue + 1.0));
    nbar[i] = ratio / (1.0 - ratio);
  }
  const double n = static_cast<double>(t.size());
  double tm = 0.0, nm = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    tm += t[i] / n;
    nm += nbar[i] / n;
  }
  double stt = 0.0, stn = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    stn += (t[i] - tm) * (nbar[i] - nm);
  }
  if (!(stt > 0.0)) throw ValidationError("delays must not all be equal");
  const double slope = stn / stt;
  double var = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double nf = std::max(m.initial_nbar + true_rate * t[i], 1e-6);
    const double r = nf / (nf + 1.0);
    const double pr = pb * r;
    const double var_r = r * r * ((1.0 - pr) / (m.n_shots * pr) + (1.0 - pb) / (m.n_shots * pb));
    const double dn_dr = (nf + 1.0) * (nf + 1.0);
    var += (t[i] - tm) * (t[i] - tm) * dn_dr * dn_dr * var_r;
  }
  HeatingPoint p;
  p.rate = std::max(slope, 0.0);
  p.rate_sigma = std::sqrt(var) / stt;
  return p;
}

SyntheticExperiment generate_dataset(const ExperimentPlan& plan, std::uint64_t seed) {
  plan.validate();
  SyntheticExperiment out;
  out.dataset.regime = plan.regime;
  out.dataset.context = plan.context;
  for (std::size_t i = 0; i < plan.injected_psd.size(); ++i) {
    std::mt19937_64 rng(derive_seed(seed, 2 * i));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double s_true = plan.injected_psd[i] + plan.residual_psd;
    const double rate = plan.true_rate(s_true);
    HeatingPoint p = measure_rate(plan.measurement, rate, derive_seed(seed, 2 * i + 1));
    double s_reported = s_true;
    if (plan.psd_relative_sigma > 0.0) {
      do {
        s_reported = s_true * (1.0 + plan.psd_relative_sigma * normal(rng));
      } while (s_reported < 0.0);
    }
    p.s = s_reported;
    p.s_sigma = plan.psd_relative_sigma * s_reported;
    out.dataset.points.push_back(p);
    out.true_psd.push_back(s_true);
    out.true_rate.push_back(rate);
  }
  return out;
}

void write_truth(std::ostream& out, const ExperimentPlan& plan, const SyntheticExperiment& exp,
                 std::uint64_t seed) {
  const auto old = out.precision(17);
  out << "# synthetic experiment truth\n"
      << "regime = " << to_string(plan.regime) << '\n'
      << "seed = " << seed << '\n'
      << "background = " << plan.background << '\n'
      << (plan.regime == Regime::kDc ? "distance_m = " : "gradient_v2_per_m3 = ") << plan.parameter << '\n'
      << "slope = " << plan.slope() << '\n'
      << "residual_psd = " << plan.residual_psd << '\n'
      << "n_shots = " << plan.measurement.n_shots << '\n';
  for (std::size_t i = 0; i < exp.true_psd.size(); ++i) {
    out << "point_" << i << " = " << exp.true_psd[i] << ',' << exp.true_rate[i] << '\n';
  }
  out.precision(old);
}

}  // namespace ionheat
