#include "ionheat/reproduce.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "ionheat/config.hpp"
#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"
#include "ionheat/fields.hpp"
#include "ionheat/fit.hpp"
#include "ionheat/heating.hpp"
#include "ionheat/noise.hpp"
#include "ionheat/oracle.hpp"
#include "ionheat/synth.hpp"
#include "ionheat/trap.hpp"

namespace ionheat {

namespace {

using constants::kTwoPi;

const double kRfOmega = kTwoPi * 64.5e6;
const double kAxialOmega = kTwoPi * 1.29e6;
const ResonatorParams kHelical{170.0, 500e-9, kRfOmega};

// Pinned tolerances.
constexpr double kTolResonator = 0.02;
constexpr double kTolDcCoefficient = 0.01;
constexpr double kTolExact = 1e-12;
constexpr double kTolRfIntrinsic = 0.30;
constexpr int kRoundtripSeeds = 100;
constexpr int kRoundtripRequired = 95;
constexpr double kTolSecularRelative = 0.05;
constexpr double kSigmaBound = 3.0;
constexpr int kSecularRealizations = 4000;
constexpr int kSecularPeriods = 500;
constexpr int kRfRealizations = 200;
constexpr int kRfPeriods = 100;
constexpr double kRequiredDriveDb = 30.0;
constexpr double kTolVoltageIndependence = 0.05;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

const char* kTitles[kCriterionCount] = {
    "resonator sideband noise",          "field-noise coefficient",       "electrode group combination",
    "RF pseudopotential self-consistency", "characteristic distances from geometry", "synthetic fit roundtrips",
    "secular-heating oracle",            "RF-noise oracle",                "bandpass mitigation",
    "drive response and RF-voltage independence"};

CriterionResult named(int id) {
  CriterionResult r;
  r.id = id;
  r.title = kTitles[id - 1];
  return r;
}

FitContext reference_context() {
  FitContext c;
  c.omega = kAxialOmega;
  c.rf_omega = kRfOmega;
  c.rf_amplitude = 49.6;
  return c;
}

CriterionResult resonator_noise() {
  CriterionResult r = named(1);
  const double s = resonator_voltage_noise(kHelical, 8e-15, kAxialOmega, true);
  const double rel = s / 1.17e-11 - 1.0;
  r.pass = std::abs(rel) <= kTolResonator;
  r.detail = fmt("S_V(Omega+-w) = %.4e V^2/Hz, target 1.17e-11 +- 2%% (off by %+.2f%%)", s, 100 * rel);
  return r;
}

CriterionResult dc_coefficient() {
  CriterionResult r = named(2);
  const IonSpecies sr;
  const double k = dc_coupling(sr, kAxialOmega, 6.5e-3);
  const double johnson = heating_rate_dc(sr, kAxialOmega, 1e-22, 6.5e-3);
  const double rel = k / 1.22e18 - 1.0;
  r.pass = std::abs(rel) <= kTolDcCoefficient && johnson >= 1.0e-4 && johnson <= 1.3e-4;
  r.detail = fmt("coefficient %.4e per V^2/Hz (target 1.22e18 +- 1%%, off %+.2f%%); Johnson 1e-22 V^2/Hz -> %.3e quanta/s "
                 "(target 1.0e-4..1.3e-4)",
                 k, 100 * rel, johnson);
  return r;
}

CriterionResult group_combination() {
  CriterionResult r = named(3);
  const double u = combine_groups(0.023, 4, Correlation::kUncorrelated);
  const double s = combine_groups(0.023, 4, Correlation::kSymmetricInPhase);
  const double w = combine_groups(0.023, 4, Correlation::kWorstCaseCoherent);
  r.pass = std::abs(u - 0.092) <= kTolExact && std::abs(w - 0.368) <= kTolExact && s == 0.0 &&
           std::abs(std::round(w * 100) / 100 - 0.37) <= kTolExact;
  r.detail = fmt("uncorrelated %.6g (0.092), symmetric %.3g (0), worst case %.6g (0.368, rounds to 0.37)", u, s, w);
  return r;
}

CriterionResult rf_self_consistency() {
  CriterionResult r = named(4);
  const IonSpecies sr;
  const double v0 = solve_rf_amplitude(sr, kAxialOmega, kRfOmega, 2.1e12, 1.17e-11, 12.0);
  const double after = heating_rate_rf(sr, kAxialOmega, kRfOmega, v0, 2e11, 1.17e-11);
  const double rel = after / 0.15 - 1.0;
  r.pass = v0 >= 45.0 && v0 <= 55.0 && std::abs(rel) <= kTolRfIntrinsic;
  r.detail = fmt("V0 = %.2f V (target 45..55); grad 2e11 -> %.4f quanta/s vs 0.15 (off %+.1f%%, allowed 30%%)", v0,
                 after, 100 * rel);
  return r;
}

CriterionResult characteristic_distances(const ReproduceOptions& o) {
  CriterionResult r = named(5);
  const Timer t;
  const auto cfg = RunConfig::load(o.data_dir / "bundled.cfg");
  const auto layout = layout_from(cfg);
  const auto trap = trap_config_from(cfg, layout);
  const auto op = find_equilibrium(layout, trap);
  const Vec3 axis = op.axis(TrapOperatingPoint::kAxial);
  const auto d_a = characteristic_distance(layout, "A", axis, op.position);
  const Vec3 null = find_rf_null(layout, op.position);
  const auto d_rf = characteristic_distance(layout, layout.rf_group(), axis, null);
  const double seconds = t.seconds();
  r.pass = d_a.coupled && d_a.value >= 4e-3 && d_a.value <= 10e-3 && d_rf.value > 1.0 && seconds < 10.0;
  r.detail = fmt("D_y,A = %.3f mm (target 4..10, reference 6.4); D_y,RF = %s (target > 1 m); w_y/2pi = %.4f MHz; "
                 "runtime limit 10 s; layout is approximate",
                 1e3 * d_a.value, d_rf.coupled ? fmt("%.3g m", d_rf.value).c_str() : "no coupling",
                 op.secular_omega[TrapOperatingPoint::kAxial] / kTwoPi / 1e6);
  return r;
}

ExperimentPlan roundtrip_plan(Regime regime) {
  ExperimentPlan p;
  p.regime = regime;
  p.context = reference_context();
  if (regime == Regime::kDc) {
    p.background = 10.0;
    p.parameter = 6.5e-3;
    p.residual_psd = 1.9e-20;
    for (int i = 0; i < 8; ++i) p.injected_psd.push_back(1e-19 * std::pow(1e4, i / 7.0));
  } else {
    p.background = 10.0;
    p.parameter = 2.1e12;
    p.residual_psd = 1.17e-11;
    p.injected_psd.push_back(0.0);
    for (int i = 0; i < 7; ++i) p.injected_psd.push_back(1e-11 * std::pow(1e3, i / 6.0));
  }
  return p;
}

CriterionResult fit_roundtrips() {
  CriterionResult r = named(6);
  const Timer t;
  int ok[2] = {0, 0};
  int background_ok[2] = {0, 0};
  for (int k = 0; k < 2; ++k) {
    const auto plan = roundtrip_plan(k == 0 ? Regime::kDc : Regime::kRf);
    for (int seed = 0; seed < kRoundtripSeeds; ++seed) {
      const auto f = fit_dataset(generate_dataset(plan, seed).dataset);
      if (std::abs(f.derived - plan.parameter) <= 2.0 * f.derived_sigma) ++ok[k];
      if (std::abs(f.background - plan.background) <= 2.0 * f.background_sigma) ++background_ok[k];
    }
  }
  const double seconds = t.seconds();
  r.pass = ok[0] >= kRoundtripRequired && ok[1] >= kRoundtripRequired && seconds < 60.0;
  r.detail = fmt("D within 2 sigma in %d/100, grad within 2 sigma in %d/100 (need >= 95 each); background within 2 sigma "
                 "%d/100 and %d/100 (reported only); runtime limit 60 s",
                 ok[0], ok[1], background_ok[0], background_ok[1]);
  return r;
}

CriterionResult secular_oracle(const ReproduceOptions& o) {
  CriterionResult r = named(7);
  const Timer t;
  const double omega = kTwoPi * 1e6;
  SecularOracleOptions so;
  so.duration = kSecularPeriods * kTwoPi / omega;
  so.n_realizations = kSecularRealizations;
  so.seed = 1;
  so.threads = o.threads;
  const auto e = simulate_secular_heating(IonSpecies{}, omega, 1e-12, so);
  const double seconds = t.seconds();
  const double diff = e.rate - e.predicted_rate;
  r.pass = std::abs(diff) <= kSigmaBound * e.statistical_sigma &&
           std::abs(diff) <= kTolSecularRelative * e.predicted_rate && seconds < 300.0;
  r.detail = fmt("%.2f +- %.2f quanta/s vs closed form %.2f (%+.2f%%, %.2f sigma; need < 3 sigma and < 5%%); n = %d; "
                 "runtime limit 300 s",
                 e.rate, e.statistical_sigma, e.predicted_rate, 100 * diff / e.predicted_rate,
                 std::abs(diff) / e.statistical_sigma, e.n_realizations);
  return r;
}

CriterionResult rf_oracle(const ReproduceOptions& o) {
  CriterionResult r = named(8);
  const Timer t;
  const auto cfg = RunConfig::load(o.data_dir / "bundled.cfg");
  const auto layout = layout_from(cfg);
  const auto trap = trap_config_from(cfg, layout);
  const double s_v = 1e-12;
  RfOracleOptions ro;
  ro.n_realizations = kRfRealizations;
  ro.threads = o.threads;
  const double omega = find_equilibrium(layout, trap).secular_omega[TrapOperatingPoint::kAxial];
  ro.duration = kRfPeriods * kTwoPi / omega;

  struct Run {
    double grad, rate, sigma, predicted;
    std::vector<double> per_realization;
  };
  // Displacements along z whose gradients stand in the ratio 1:2:4.
  const auto gradient_at = [&](double d) { return displace_from_null(layout, trap, {0, 0, d}).axial_gradient; };
  const double d0 = 0.25e-6;
  const double g0 = gradient_at(d0);
  std::vector<double> displacements{d0};
  for (double factor : {2.0, 4.0}) {
    double lo = displacements.back(), hi = 4.0 * lo;
    for (int i = 0; i < 40; ++i) {
      const double mid = 0.5 * (lo + hi);
      (std::abs(gradient_at(mid)) < factor * std::abs(g0) ? lo : hi) = mid;
    }
    displacements.push_back(0.5 * (lo + hi));
  }
  std::vector<Run> runs;
  for (double d : displacements) {
    const Vec3 disp(0, 0, d);
    const auto e = simulate_rf_noise_heating(layout, trap, disp, s_v, ro);
    runs.push_back({gradient_at(d), e.rate, e.statistical_sigma, e.predicted_rate, e.realization_rates});
  }
  RfOracleOptions single = ro;
  single.both_sidebands = false;
  const auto one = simulate_rf_noise_heating(layout, trap, {0, 0, displacements[1]}, s_v, single);
  const double seconds = t.seconds();

  // rate / grad^2 must agree across displacements.
  bool scaling = true;
  std::string scale_text;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const double g2 = std::pow(runs[i].grad / runs[0].grad, 2);
    const double expected = runs[0].rate * g2;
    const double combined = std::hypot(runs[i].sigma, runs[0].sigma * g2);
    scaling &= std::abs(runs[i].rate - expected) <= kSigmaBound * combined;
    scale_text += fmt(" %.3f (grad^2 %.3f)", runs[i].rate / runs[0].rate, g2);
  }
  // Runs share noise realizations, so the per-realization difference resolves
  // departures from grad^2 scaling far below the independent combined error.
  std::string paired_text = "; paired deviation from grad^2 (shared noise, informational):";
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const double g2 = std::pow(runs[i].grad / runs[0].grad, 2);
    const auto& a = runs[i].per_realization;
    const auto& b = runs[0].per_realization;
    const std::size_t n = std::min(a.size(), b.size());
    double mean = 0.0, sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) mean += a[k] / g2 - b[k];
    mean /= static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) sq += std::pow(a[k] / g2 - b[k] - mean, 2);
    const double sem = std::sqrt(sq / static_cast<double>(n - 1) / static_cast<double>(n));
    paired_text += fmt(" %+.1f%% (%.1f sigma)", 100.0 * mean / runs[0].rate, sem > 0.0 ? mean / sem : 0.0);
  }
  const double half = one.rate / runs[1].rate;
  const double half_sigma = half * std::hypot(one.statistical_sigma / one.rate, runs[1].sigma / runs[1].rate);
  const bool halving = std::abs(half - 0.5) <= kSigmaBound * half_sigma;
  r.pass = scaling && halving && seconds < 900.0;
  r.detail = fmt("z displacements %.3f %.3f %.3f um; ", 1e6 * displacements[0], 1e6 * displacements[1],
                 1e6 * displacements[2]) +
             fmt("grads %.3g %.3g %.3g V^2/m^3; rates %.4g+-%.2g %.4g+-%.2g %.4g+-%.2g (closed form %.4g %.4g %.4g); ratios",
                 runs[0].grad, runs[1].grad, runs[2].grad, runs[0].rate, runs[0].sigma, runs[1].rate, runs[1].sigma,
                 runs[2].rate, runs[2].sigma, runs[0].predicted, runs[1].predicted, runs[2].predicted) +
             scale_text + paired_text +
             fmt("; single/both sideband %.3f +- %.3f (target 0.5); n = %d each; runtime limit 900 s", half, half_sigma,
                 kRfRealizations);
  return r;
}

CriterionResult mitigation() {
  CriterionResult r = named(9);
  const IonSpecies sr;
  const double f_rf = kRfOmega / kTwoPi, f_sec = kAxialOmega / kTwoPi;
  const TransferChain source({Resonator{kHelical, 0.0}});
  const TransferChain filtered = TransferChain({Bandpass{f_rf, f_sec, 20.0}}).then(source);
  const std::vector<double> grid{f_rf - 2 * f_sec, f_rf - f_sec, f_rf, f_rf + f_sec, f_rf + 2 * f_sec};
  const NoiseSpectrum input(SpectrumKind::kPower, grid, std::vector<double>(grid.size(), 8e-15));
  const auto before = apply_chain(source, input);
  const auto after = apply_chain(filtered, input);
  const double s_before = before.at(f_rf - f_sec) + before.at(f_rf + f_sec);
  const double s_after = after.at(f_rf - f_sec) + after.at(f_rf + f_sec);
  const double carrier_ratio = after.at(f_rf) / before.at(f_rf);
  const double rate_before = heating_rate_rf(sr, kAxialOmega, kRfOmega, 49.6, 2.1e12, s_before);
  const double rate_after = heating_rate_rf(sr, kAxialOmega, kRfOmega, 49.6, 2.1e12, s_after);
  HeatingBudget b0, b1;
  b0.add({SourceKind::kRfSidebands, "rf", rate_before, 0.0});
  b1.add({SourceKind::kRfSidebands, "rf", rate_after, 0.0});
  const double psd_ratio = s_before / s_after;
  const double entry_ratio = b0.entries()[0].rate / b1.entries()[0].rate;
  r.pass = std::abs(psd_ratio / 100.0 - 1.0) <= kTolExact && std::abs(entry_ratio / 100.0 - 1.0) <= kTolExact &&
           std::abs(carrier_ratio - 1.0) <= kTolExact;
  r.detail = fmt("S_V(Omega+-w) %.4e -> %.4e V^2/Hz (x%.12g); budget entry %.4g -> %.4g quanta/s (x%.12g); carrier x%.12g",
                 s_before, s_after, psd_ratio, rate_before, rate_after, entry_ratio, carrier_ratio);
  return r;
}

CriterionResult drive_and_voltage_independence(const ReproduceOptions& o) {
  CriterionResult r = named(10);
  const auto cfg = RunConfig::load(o.data_dir / "bundled.cfg");
  const auto layout = load_layout(o.data_dir / "short_rail_approx.layout");
  TrapConfig base = trap_config_from(cfg, layout);
  const Vec3 null = find_rf_null(layout, {0, 0, layout.ion_height_hint()});
  base.search_center = null;
  base.dc_voltages = design_axial_confinement(layout, base, {{"A"}, {"B"}, {"ML", "MR"}, {"C"}}, kAxialOmega, null);
  base.stray_field = {0, 0, 420};

  // Part 1: equal excitation at Omega + 2w needs >= 30 dB more drive power than at Omega + w.
  const auto op = find_equilibrium(layout, base);
  const double w = op.secular_omega[TrapOperatingPoint::kAxial];
  const double duration = 100 * kTwoPi / w;
  const double a1 = 0.01;
  const double a2 = a1 * std::pow(10.0, kRequiredDriveDb / 20.0);
  const double amp1 = simulate_drive_response(layout, base, base.rf_omega + w, a1, duration).max_amplitude;
  const double amp2_equal = simulate_drive_response(layout, base, base.rf_omega + 2 * w, a1, duration).max_amplitude;
  const double amp2 = simulate_drive_response(layout, base, base.rf_omega + 2 * w, a2, duration).max_amplitude;
  const bool drive_ok = amp2 < amp1;

  // Part 2: modeled total after gradient minimization across V0 spanning a factor of 2.
  const double s_rf = 1.17e-11, s_dc = 1.9e-20, background = 10.0;
  std::vector<double> before, after;
  for (double v0 : {49.6, 49.6 * std::sqrt(2.0), 99.2}) {
    TrapConfig c = base;
    c.rf_amplitude = v0;
    const auto eq = find_equilibrium(layout, c);
    const ShimParametrization shims(layout, {"A", "B", "ML", "MR", "C"}, eq.position);
    const auto g = minimize_gradient(layout, c, shims);
    const auto total = [&](const TrapOperatingPoint& p, double grad) {
      const double wy = p.secular_omega[TrapOperatingPoint::kAxial];
      HeatingBudget b;
      b.add({SourceKind::kBackground, "background", background, 0.0});
      for (const char* group : {"A", "B", "ML", "C"}) {
        b.add({SourceKind::kDcGroup, group, heating_rate_dc(c.species, wy, s_dc, 6.5e-3), 0.0});
      }
      b.add({SourceKind::kRfSidebands, "rf", heating_rate_rf(c.species, wy, c.rf_omega, v0, grad, s_rf), 0.0});
      return b.total(Correlation::kUncorrelated).value;
    };
    before.push_back(total(g.initial, g.initial_gradient));
    after.push_back(total(g.operating_point, g.residual_gradient));
  }
  const auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return (*hi - *lo) / (0.5 * (*hi + *lo));
  };
  const bool flat = spread(after) < kTolVoltageIndependence;
  r.pass = drive_ok && flat;
  r.detail = fmt("short-rail layout, stray 420 V/m z, grad %.3g V^2/m^3: amplitude %.3g m at Omega+w (%.3g V) vs %.3g m "
                 "at Omega+2w (%.3g V, +30 dB); equal-drive ratio %.1f dB. Totals after minimization %.4f %.4f %.4f "
                 "quanta/s at V0 = 49.6, 70.1, 99.2 V (spread %.3f%%, need < 5%%; before minimization %.1f%%)",
                 op.grad_e0_sq[TrapOperatingPoint::kAxial], amp1, a1, amp2, a2, 20 * std::log10(amp1 / amp2_equal),
                 after[0], after[1], after[2], 100 * spread(after), 100 * spread(before));
  return r;
}

}  // namespace

CriterionResult run_criterion(int id, const ReproduceOptions& options) {
  const Timer t;
  CriterionResult r;
  try {
    switch (id) {
      case 1: r = resonator_noise(); break;
      case 2: r = dc_coefficient(); break;
      case 3: r = group_combination(); break;
      case 4: r = rf_self_consistency(); break;
      case 5: r = characteristic_distances(options); break;
      case 6: r = fit_roundtrips(); break;
      case 7: r = secular_oracle(options); break;
      case 8: r = rf_oracle(options); break;
      case 9: r = mitigation(); break;
      case 10: r = drive_and_voltage_independence(options); break;
      default: throw ValidationError("no acceptance criterion " + std::to_string(id));
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    r = named(id);
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = t.seconds();
  return r;
}

std::vector<CriterionResult> run_acceptance(const ReproduceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result) {
  std::vector<int> ids = options.only;
  if (ids.empty()) {
    for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  }
  std::vector<CriterionResult> out;
  for (int id : ids) {
    out.push_back(run_criterion(id, options));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_criterion(const CriterionResult& r) {
  return fmt("criterion %d %s  %s: ", r.id, r.pass ? "PASS" : "FAIL", r.title.c_str()) + r.detail +
         fmt(" [%.1f s]", r.seconds);
}

void write_acceptance_csv(std::ostream& out, const std::vector<CriterionResult>& results) {
  out << "criterion,title,result,detail\n";
  for (const auto& r : results) {
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), '"', '\'');
    out << r.id << ',' << r.title << ',' << (r.pass ? "PASS" : "FAIL") << ",\"" << detail << "\"\n";
  }
}

}  // namespace ionheat
