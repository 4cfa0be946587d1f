#include "ionheat/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ionheat/config.hpp"
#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"
#include "ionheat/fields.hpp"
#include "ionheat/fit.hpp"
#include "ionheat/heating.hpp"
#include "ionheat/noise.hpp"
#include "ionheat/oracle.hpp"
#include "ionheat/random.hpp"
#include "ionheat/reproduce.hpp"
#include "ionheat/synth.hpp"
#include "ionheat/trap.hpp"

namespace ionheat {

namespace fs = std::filesystem;

namespace {

using constants::kTwoPi;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class Context {
 public:
  Context(const Common& c, std::ostream& out) : out_(out) {
    const fs::path path = c.config.empty() ? fs::path(IONHEAT_DATA_DIR) / "bundled.cfg" : fs::path(c.config);
    cfg_ = RunConfig::load(path);
    for (const auto& s : c.sets) cfg_.set(s);
    if (c.seed) cfg_.set("run.seed", std::to_string(*c.seed));
    if (c.threads) cfg_.set("run.threads", std::to_string(*c.threads));
    out_dir_ = resolve_out_dir(c.out_dir.empty() ? std::nullopt : std::optional<fs::path>(c.out_dir));
    fs::create_directories(out_dir_);
  }

  RunConfig& cfg() { return cfg_; }
  std::uint64_t seed() const { return cfg_.get_seed("run.seed", 1); }
  int threads() const { return cfg_.get_int("run.threads", 0); }
  std::ostream& out() { return out_; }

  std::ofstream open(const std::string& name) {
    std::ofstream f(out_dir_ / name);
    if (!f) throw ValidationError("cannot write '" + (out_dir_ / name).string() + "'");
    written_.push_back(name);
    return f;
  }

  // Writes the report to stdout and to `name` in the output directory.
  void report(const std::string& name, const std::string& text) {
    out_ << text;
    open(name) << text;
  }

  void finish() {
    for (const auto& w : written_) out_ << "wrote " << (out_dir_ / w).string() << '\n';
  }

 private:
  std::ostream& out_;
  RunConfig cfg_;
  fs::path out_dir_;
  std::vector<std::string> written_;
};

std::vector<Vec3> parse_points(const std::string& text) {
  std::vector<Vec3> out;
  std::istringstream parts(text);
  for (std::string item; std::getline(parts, item, ';');) {
    std::istringstream in(item);
    Vec3 p;
    if (!(in >> p.x() >> p.y() >> p.z())) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      throw ValidationError("config: key 'fields.points_m' has a malformed point '" + item + "'");
    }
    std::string extra;
    if (in >> extra) throw ValidationError("config: key 'fields.points_m' point '" + item + "' has more than 3 numbers");
    out.push_back(p);
  }
  return out;
}

std::string layout_note(const ElectrodeLayout& layout) {
  return "layout: " + (layout.description().empty() ? std::string("(no description)") : layout.description()) + "\n";
}

int cmd_fields(Context& ctx) {
  auto& cfg = ctx.cfg();
  const auto layout = layout_from(cfg);
  std::vector<Vec3> points;
  if (cfg.has("fields.points_m")) points = parse_points(cfg.get_string("fields.points_m"));
  if (points.empty()) points.push_back(find_equilibrium(layout, trap_config_from(cfg, layout)).position);
  std::vector<std::string> groups = cfg.has("fields.groups") ? cfg.get_words("fields.groups") : layout.groups();
  auto csv = ctx.open("fields.csv");
  csv << "x,y,z,group,potential,Ex,Ey,Ez\n";
  for (const auto& p : points) {
    for (const auto& g : groups) {
      const auto s = basis_solution(layout, g, p);
      csv << num(p.x()) << ',' << num(p.y()) << ',' << num(p.z()) << ',' << g << ',' << num(s.potential) << ','
          << num(s.field.x()) << ',' << num(s.field.y()) << ',' << num(s.field.z()) << '\n';
    }
  }
  ctx.report("fields_report.txt", layout_note(layout) + "unit-voltage basis fields for " + std::to_string(groups.size()) +
                                      " groups at " + std::to_string(points.size()) + " points\n");
  return 0;
}

std::string describe_op(const TrapOperatingPoint& op) {
  std::ostringstream s;
  s << "position (m)        " << num(op.position.x()) << ' ' << num(op.position.y()) << ' ' << num(op.position.z())
    << '\n';
  const char* names[3] = {"x", "y (axial)", "z"};
  for (int i = 0; i < 3; ++i) {
    const Vec3 a = op.axis(i);
    s << "mode " << names[i] << ": f = " << num(op.secular_omega[i] / kTwoPi) << " Hz, axis (" << num(a.x()) << ", "
      << num(a.y()) << ", " << num(a.z()) << "), dE0^2/di = " << num(op.grad_e0_sq[i]) << " V^2/m^3\n";
  }
  s << "E0^2 at ion         " << num(op.e0_sq) << " V^2/m^2\n";
  return s.str();
}

int cmd_trap(Context& ctx, bool minimize) {
  auto& cfg = ctx.cfg();
  const auto layout = layout_from(cfg);
  const auto trap = trap_config_from(cfg, layout);
  auto op = find_equilibrium(layout, trap);
  std::ostringstream report;
  report << layout_note(layout) << describe_op(op);
  report << "rf_frequency/w_y    " << num(trap.rf_omega / op.secular_omega[TrapOperatingPoint::kAxial]) << '\n';
  if (minimize || cfg.get_bool("trap.minimize_gradient", false)) {
    const auto groups = cfg.get_words("shims.groups");
    const ShimParametrization shims(layout, groups, op.position);
    const auto g = minimize_gradient(layout, trap, shims);
    report << "gradient minimization: " << num(g.initial_gradient) << " -> " << num(g.residual_gradient)
           << " V^2/m^3 with shim field (" << num(g.shim.x()) << ", " << num(g.shim.y()) << ", " << num(g.shim.z())
           << ") V/m" << (g.already_minimized ? " (already minimized)" : "") << '\n';
    for (const auto& [group, dv] : g.dc_offsets) report << "  shim " << group << " " << num(dv) << " V\n";
    op = g.operating_point;
    report << "after minimization:\n" << describe_op(op);
  }
  auto csv = ctx.open("trap.csv");
  csv << "x_m,y_m,z_m,f_x_hz,f_y_hz,f_z_hz,grad_e0_sq_x,grad_e0_sq_y,grad_e0_sq_z,e0_sq\n";
  csv << num(op.position.x()) << ',' << num(op.position.y()) << ',' << num(op.position.z());
  for (double w : op.secular_omega) csv << ',' << num(w / kTwoPi);
  for (int i = 0; i < 3; ++i) csv << ',' << num(op.grad_e0_sq[i]);
  csv << ',' << num(op.e0_sq) << '\n';

  auto dist = ctx.open("distances.csv");
  dist << "group,axis,distance_m,coupled\n";
  report << "characteristic distances along the axial mode:\n";
  const Vec3 axial = op.axis(TrapOperatingPoint::kAxial);
  for (const auto& g : layout.groups()) {
    const bool rf = g == layout.rf_group();
    const Vec3 at = rf ? find_rf_null(layout, op.position) : op.position;
    const auto d = characteristic_distance(layout, g, axial, at);
    dist << g << ",y," << (d.coupled ? num(d.value) : std::string("inf")) << ',' << (d.coupled ? 1 : 0) << '\n';
    report << "  D_y," << g << (rf ? " (at RF null)" : "") << " = "
           << (d.coupled ? num(d.value) + " m" : std::string("no coupling")) << '\n';
  }
  ctx.report("trap_report.txt", report.str());
  return 0;
}

NoiseSpectrum chain_input(const RunConfig& cfg) {
  if (cfg.has("chain.input_file")) return load_spectrum(cfg.get_path("chain.input_file"));
  const auto band = cfg.get_doubles("chain.input_band_hz");
  if (band.size() != 2) throw ValidationError("config: key 'chain.input_band_hz' needs 2 numbers");
  return NoiseSpectrum::flat(parse_spectrum_kind(cfg.get_string("chain.input_kind", "voltage")), band[0], band[1],
                             cfg.get_double("chain.input_psd"));
}

int cmd_chain(Context& ctx) {
  auto& cfg = ctx.cfg();
  const auto chain = chain_from(cfg);
  const auto input = chain_input(cfg);
  const SpectrumKind out_kind = chain.output_kind(input.kind());
  std::vector<double> freqs = cfg.has("chain.evaluate_hz") ? cfg.get_doubles("chain.evaluate_hz") : input.frequencies();
  auto csv = ctx.open("chain.csv");
  csv << "frequency_hz,input_psd,response,output_psd\n";
  std::vector<double> out_psd;
  for (double f : freqs) {
    const double in = input.at(f), resp = chain.response(f);
    out_psd.push_back(in * resp);
    csv << num(f) << ',' << num(in) << ',' << num(resp) << ',' << num(in * resp) << '\n';
  }
  std::ostringstream report;
  report << "input " << to_string(input.kind()) << " spectrum -> output " << to_string(out_kind) << " spectrum\n";
  for (std::size_t i = 0; i < chain.stages().size(); ++i) {
    report << "  stage " << i + 1 << ": " << describe_stage(chain.stages()[i]) << '\n';
  }
  for (std::size_t i = 0; i < freqs.size(); ++i) report << "  " << num(freqs[i]) << " Hz: " << num(out_psd[i]) << '\n';
  std::vector<std::size_t> order(freqs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return freqs[a] < freqs[b]; });
  std::vector<double> sf, sp;
  for (auto i : order) {
    if (!sf.empty() && sf.back() == freqs[i]) continue;
    sf.push_back(freqs[i]);
    sp.push_back(out_psd[i]);
  }
  if (sf.size() >= 2) {
    auto spectrum = ctx.open("chain_output.csv");
    write_spectrum(spectrum, NoiseSpectrum(out_kind, sf, sp));
  }
  ctx.report("chain_report.txt", report.str());
  return 0;
}

int cmd_budget(Context& ctx) {
  auto& cfg = ctx.cfg();
  const IonSpecies species = species_from(cfg);
  const double rf_omega = kTwoPi * cfg.get_double("trap.rf_frequency_hz");
  const double v0 = cfg.get_double("trap.rf_amplitude_v");
  std::optional<TrapOperatingPoint> op;
  std::optional<ElectrodeLayout> layout;
  const auto operating_point = [&]() -> const TrapOperatingPoint& {
    if (!op) {
      layout.emplace(layout_from(cfg));
      op = find_equilibrium(*layout, trap_config_from(cfg, *layout));
    }
    return *op;
  };
  const double omega = cfg.has("budget.secular_frequency_hz")
                           ? kTwoPi * cfg.get_double("budget.secular_frequency_hz")
                           : operating_point().secular_omega[TrapOperatingPoint::kAxial];
  const double gradient = cfg.has("budget.gradient_v2_per_m3") ? cfg.get_double("budget.gradient_v2_per_m3")
                                                               : operating_point().grad_e0_sq[TrapOperatingPoint::kAxial];
  const double gradient_sigma = cfg.get_double("budget.gradient_sigma", 0.0);
  const double s_dc = cfg.get_double("budget.dc_psd_v2_per_hz");
  const double s_dc_sigma = cfg.get_double("budget.dc_psd_sigma", 0.0);
  const double s_rf = cfg.get_double("budget.rf_psd_v2_per_hz");
  const double s_rf_sigma = cfg.get_double("budget.rf_psd_sigma", 0.0);
  const bool monte_carlo = cfg.get_bool("budget.monte_carlo", false);

  HeatingBudget budget;
  budget.add({SourceKind::kBackground, "background", cfg.get_double("budget.background"),
              cfg.get_double("budget.background_sigma", 0.0)});
  std::ostringstream report;
  for (const auto& g : cfg.get_words("budget.dc_groups")) {
    double d = 0.0;
    if (cfg.has("budget.dc_distance_m")) {
      d = cfg.get_double("budget.dc_distance_m");
    } else {
      const auto& p = operating_point();
      const auto cd = characteristic_distance(*layout, g, p.axis(TrapOperatingPoint::kAxial), p.position);
      if (!cd.coupled) {
        report << "group " << g << ": no coupling along the axial mode, contributes 0\n";
        budget.add({SourceKind::kDcGroup, g, 0.0, 0.0});
        continue;
      }
      d = cd.value;
    }
    const double rate = heating_rate_dc(species, omega, s_dc, d);
    budget.add({SourceKind::kDcGroup, g, rate, rate * s_dc_sigma / s_dc});
  }
  const double rf_rate = heating_rate_rf(species, omega, rf_omega, v0, gradient, s_rf);
  double rf_sigma = rf_rate * std::hypot(2.0 * (gradient != 0.0 ? gradient_sigma / gradient : 0.0), s_rf_sigma / s_rf);
  if (monte_carlo) {
    const std::vector<double> means{gradient, s_rf}, sigmas{gradient_sigma, s_rf_sigma};
    const auto e = propagate_monte_carlo(
        [&](std::span<const double> x) { return heating_rate_rf(species, omega, rf_omega, v0, x[0], x[1]); }, means,
        sigmas, 20000, derive_seed(ctx.seed(), 0), false);
    rf_sigma = e.sigma;
    report << "RF term Monte-Carlo: mean " << num(e.value) << " sd " << num(e.sigma) << " quanta/s\n";
  }
  budget.add({SourceKind::kRfSidebands, "rf_sidebands", rf_rate, rf_sigma});

  auto csv = ctx.open("budget.csv");
  csv << "source,label,rate_quanta_per_s,uncertainty\n";
  for (const auto& e : budget.entries()) {
    csv << to_string(e.kind) << ',' << e.label << ',' << num(e.rate) << ',' << num(e.uncertainty) << '\n';
  }
  for (auto c : {Correlation::kUncorrelated, Correlation::kSymmetricInPhase, Correlation::kWorstCaseCoherent}) {
    const auto t = budget.total(c);
    csv << "total," << to_string(c) << ',' << num(t.value) << ',' << num(t.sigma) << '\n';
  }
  report << "secular frequency " << num(omega / kTwoPi) << " Hz, V0 " << num(v0) << " V, dE0^2/dy " << num(gradient)
         << " V^2/m^3\n";
  report << "DC noise " << num(s_dc) << " V^2/Hz per group"
         << (cfg.get_bool("budget.dc_psd_derived", false) ? " (derived, back-computed from a measured rate)" : "")
         << "; RF sideband noise " << num(s_rf) << " V^2/Hz (both sidebands)\n";
  for (const auto& e : budget.entries()) {
    report << "  " << to_string(e.kind) << ' ' << e.label << ": " << num(e.rate) << " +- " << num(e.uncertainty)
           << " quanta/s\n";
  }
  for (auto c : {Correlation::kUncorrelated, Correlation::kSymmetricInPhase, Correlation::kWorstCaseCoherent}) {
    const auto t = budget.total(c);
    report << "  total (" << to_string(c) << "): " << num(t.value) << " +- " << num(t.sigma) << " quanta/s\n";
  }
  ctx.report("budget_report.txt", report.str());
  return 0;
}

std::string fit_csv_header() {
  return "regime,background,background_sigma,slope,slope_sigma,derived,derived_sigma,chi2,dof,background_clamped,"
         "no_coupling\n";
}

int cmd_fit(Context& ctx) {
  auto& cfg = ctx.cfg();
  const Regime regime = parse_regime(cfg.get_string("fit.regime"));
  FitContext context = fit_context_from(cfg);
  auto data = load_dataset(cfg.get_path("fit.data"), context);
  data.regime = regime;
  const auto r = fit_dataset(data);
  auto csv = ctx.open("fit.csv");
  csv << fit_csv_header();
  csv << to_string(r.regime) << ',' << num(r.background) << ',' << num(r.background_sigma) << ',' << num(r.slope) << ','
      << num(r.slope_sigma) << ',' << num(r.derived) << ',' << num(r.derived_sigma) << ',' << num(r.chi2) << ','
      << r.dof << ',' << (r.background_clamped ? 1 : 0) << ',' << (r.no_coupling ? 1 : 0) << '\n';
  std::ostringstream report;
  report << "fit of " << data.points.size() << " points, regime " << to_string(regime) << '\n';
  report << "background " << num(r.background) << " +- " << num(r.background_sigma) << " quanta/s"
         << (r.background_clamped ? " (clamped at 0)" : "") << '\n';
  report << "slope " << num(r.slope) << " +- " << num(r.slope_sigma) << " quanta/s per V^2/Hz\n";
  if (r.no_coupling) {
    report << (regime == Regime::kDc ? "D undefined: negative slope (no coupling)\n"
                                     : "gradient undefined: negative slope (no coupling)\n");
  } else if (regime == Regime::kDc) {
    report << "D = " << num(r.derived) << " +- " << num(r.derived_sigma) << " m\n";
  } else {
    report << "dE0^2/dy = " << num(r.derived) << " +- " << num(r.derived_sigma) << " V^2/m^3"
           << (r.slope_consistent_with_zero() ? " (consistent with zero at 1 sigma)" : "") << '\n';
  }
  report << "chi2/dof " << num(r.chi2_per_dof()) << " (" << r.dof << " dof)\n";
  if (cfg.has("fit.residual_psd")) {
    const auto e = intrinsic_contribution(r, cfg.get_double("fit.residual_psd"), cfg.get_double("fit.residual_sigma", 0.0));
    report << "intrinsic contribution at residual PSD " << num(cfg.get_double("fit.residual_psd")) << ": " << num(e.value)
           << " +- " << num(e.sigma) << " quanta/s\n";
  }
  ctx.report("fit_report.txt", report.str());
  return 0;
}

int cmd_oracle(Context& ctx) {
  auto& cfg = ctx.cfg();
  const std::string mode = cfg.get_string("oracle.mode");
  std::ostringstream report;
  if (mode == "drive") {
    const auto layout = layout_from(cfg);
    const auto trap = trap_config_from(cfg, layout);
    const auto op = find_equilibrium(layout, trap);
    const double w = op.secular_omega[TrapOperatingPoint::kAxial];
    const double duration = cfg.get_double("oracle.duration_periods", 100) * kTwoPi / w;
    const double harmonic = cfg.get_double("oracle.drive_harmonic", 1.0);
    const double amplitude = cfg.get_double("oracle.drive_amplitude_v");
    std::vector<double> detunings{0.0};
    if (cfg.has("oracle.drive_detunings")) detunings = cfg.get_doubles("oracle.drive_detunings");
    auto csv = ctx.open("drive.csv");
    csv << "drive_frequency_hz,detuning_over_w,drive_amplitude_v,max_amplitude_m,final_amplitude_m\n";
    for (double d : detunings) {
      const double wd = trap.rf_omega + (harmonic + d) * w;
      const auto r = simulate_drive_response(layout, trap, wd, amplitude, duration);
      csv << num(wd / kTwoPi) << ',' << num(d) << ',' << num(amplitude) << ',' << num(r.max_amplitude) << ','
          << num(r.final_amplitude) << '\n';
      report << "drive at Omega + " << num(harmonic + d) << " w_y (" << num(wd / kTwoPi) << " Hz), " << num(amplitude)
             << " V: axial amplitude max " << num(r.max_amplitude) << " m\n";
    }
    ctx.report("oracle_report.txt", report.str());
    return 0;
  }
  EnsembleResult e;
  if (mode == "secular") {
    const double omega = kTwoPi * cfg.get_double("oracle.secular_frequency_hz");
    SecularOracleOptions o;
    o.duration = cfg.get_double("oracle.duration_periods") * kTwoPi / omega;
    o.n_realizations = cfg.get_int("oracle.n_realizations", o.n_realizations);
    o.seed = ctx.seed();
    o.threads = ctx.threads();
    if (cfg.has("oracle.step_s")) o.step = cfg.get_double("oracle.step_s");
    if (cfg.has("oracle.band_hz")) {
      const auto b = cfg.get_doubles("oracle.band_hz");
      if (b.size() != 2) throw ValidationError("config: key 'oracle.band_hz' needs 2 numbers");
      o.band_hz = std::make_pair(b[0], b[1]);
    }
    e = simulate_secular_heating(species_from(cfg), omega, cfg.get_double("oracle.field_psd"), o);
  } else if (mode == "rf") {
    const auto layout = layout_from(cfg);
    const auto trap = trap_config_from(cfg, layout);
    const Vec3 disp = cfg.get_vec3("oracle.displacement_m");
    const auto displaced = displace_from_null(layout, trap, disp);
    RfOracleOptions o;
    o.duration = cfg.get_double("oracle.duration_periods") * kTwoPi /
                 displaced.op.secular_omega[TrapOperatingPoint::kAxial];
    o.n_realizations = cfg.get_int("oracle.n_realizations", o.n_realizations);
    o.seed = ctx.seed();
    o.threads = ctx.threads();
    o.both_sidebands = cfg.get_bool("oracle.both_sidebands", true);
    o.steps_per_rf_period = cfg.get_int("oracle.steps_per_rf_period", o.steps_per_rf_period);
    e = simulate_rf_noise_heating(layout, trap, disp, cfg.get_double("oracle.sideband_psd"), o);
    report << "displaced " << num(disp.norm()) << " m from the RF null, dE0^2/dy = " << num(displaced.axial_gradient)
           << " V^2/m^3\n";
  } else {
    throw ValidationError("config: key 'oracle.mode' must be secular, rf or drive, got '" + mode + "'");
  }
  auto csv = ctx.open("oracle.csv");
  csv << "mode,rate,statistical_sigma,n_realizations,predicted_rate,linearity\n";
  csv << mode << ',' << num(e.rate) << ',' << num(e.statistical_sigma) << ',' << e.n_realizations << ','
      << num(e.predicted_rate) << ',' << num(e.linearity) << '\n';
  if (cfg.get_bool("oracle.write_traces", false)) {
    auto traces = ctx.open("oracle_traces.csv");
    traces << "time_s,mean_energy_quanta\n";
    for (std::size_t i = 0; i < e.trace_time.size(); ++i) {
      traces << num(e.trace_time[i]) << ',' << num(e.trace_mean_quanta[i]) << '\n';
    }
    auto runs = ctx.open("oracle_runs.csv");
    runs << "realization,rate\n";
    for (std::size_t i = 0; i < e.realization_rates.size(); ++i) runs << i << ',' << num(e.realization_rates[i]) << '\n';
  }
  report << mode << " oracle: " << num(e.rate) << " +- " << num(e.statistical_sigma) << " quanta/s from "
         << e.n_realizations << " realizations; closed form " << num(e.predicted_rate) << " quanta/s; linearity R^2 "
         << num(e.linearity) << '\n';
  ctx.report("oracle_report.txt", report.str());
  return 0;
}

int cmd_synth(Context& ctx) {
  auto& cfg = ctx.cfg();
  ExperimentPlan plan;
  plan.regime = parse_regime(cfg.get_string("synth.regime"));
  plan.context.species = species_from(cfg);
  plan.context.omega = kTwoPi * cfg.get_double("synth.secular_frequency_hz");
  if (plan.regime == Regime::kRf) {
    plan.context.rf_omega = kTwoPi * cfg.get_double("trap.rf_frequency_hz");
    plan.context.rf_amplitude = cfg.get_double("trap.rf_amplitude_v");
  }
  plan.background = cfg.get_double("synth.background");
  plan.parameter = cfg.get_double("synth.parameter");
  plan.residual_psd = cfg.get_double("synth.residual_psd", 0.0);
  plan.injected_psd = cfg.get_doubles("synth.injected_psd");
  plan.psd_relative_sigma = cfg.get_double("synth.psd_relative_sigma", plan.psd_relative_sigma);
  plan.measurement.n_shots = cfg.get_int("synth.n_shots", plan.measurement.n_shots);
  plan.measurement.n_delays = cfg.get_int("synth.n_delays", plan.measurement.n_delays);
  plan.measurement.target_nbar = cfg.get_double("synth.target_nbar", plan.measurement.target_nbar);
  if (cfg.has("synth.delays_s")) plan.measurement.delays_s = cfg.get_doubles("synth.delays_s");
  const auto seed = ctx.seed();
  const auto exp = generate_dataset(plan, seed);
  {
    auto csv = ctx.open("synth.csv");
    write_dataset(csv, exp.dataset);
  }
  {
    auto truth = ctx.open("synth_truth.txt");
    write_truth(truth, plan, exp, seed);
  }
  const auto fit = fit_dataset(exp.dataset);
  auto plot = ctx.open("synth_plot.csv");
  plot << "s_v2_per_hz,rate_quanta_per_s,rate_sigma,true_rate,fitted_rate\n";
  for (std::size_t i = 0; i < exp.dataset.points.size(); ++i) {
    const auto& p = exp.dataset.points[i];
    plot << num(p.s) << ',' << num(p.rate) << ',' << num(p.rate_sigma) << ',' << num(exp.true_rate[i]) << ','
         << num(fit.background + fit.slope * p.s) << '\n';
  }
  std::ostringstream report;
  report << "synthetic " << to_string(plan.regime) << " experiment, " << exp.dataset.points.size()
         << " points, seed " << seed << "; quick fit: background " << num(fit.background) << " +- "
         << num(fit.background_sigma) << ", parameter " << num(fit.derived) << " +- " << num(fit.derived_sigma)
         << " (truth " << num(plan.parameter) << ")\n";
  ctx.report("synth_report.txt", report.str());
  return 0;
}

int cmd_reproduce(Context& ctx, const std::string& data_dir, const std::vector<int>& only) {
  ReproduceOptions o;
  o.data_dir = data_dir.empty() ? fs::path(IONHEAT_DATA_DIR) : fs::path(data_dir);
  o.threads = ctx.threads();
  o.only = only;
  std::ostringstream report;
  const auto results = run_acceptance(o, [&](const CriterionResult& r) {
    const std::string line = format_criterion(r) + "\n";
    ctx.out() << line << std::flush;
    report << line;
  });
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.pass; });
  report << failed << " of " << results.size() << " criteria failed\n";
  ctx.out() << failed << " of " << results.size() << " criteria failed\n";
  ctx.open("reproduce_report.txt") << report.str();
  auto csv = ctx.open("reproduce.csv");
  write_acceptance_csv(csv, results);
  return failed == 0 ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Technical-noise heating budget for surface-electrode ion traps", "ionheat"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config, "Run configuration file (default: bundled.cfg)");
    sub->add_option("--set", common.sets, "Override a config key: section.key=value")->take_all();
    sub->add_option("-o,--out-dir", common.out_dir, "Output directory (default: $IONHEAT_OUT_DIR or cwd)");
    sub->add_option("--seed", common.seed, "Random seed (run.seed)");
    sub->add_option("--threads", common.threads, "Worker threads, 0 for all cores (run.threads)");
  };
  auto* fields = app.add_subcommand("fields", "Unit-voltage potentials and fields per electrode group");
  auto* trap = app.add_subcommand("trap", "Equilibrium, secular frequencies, gradients, characteristic distances");
  auto* chain = app.add_subcommand("chain", "Propagate a noise spectrum through the transfer chain");
  auto* budget = app.add_subcommand("budget", "Heating budget with correlation scenarios");
  auto* fit = app.add_subcommand("fit", "Fit heating rates against injected noise");
  auto* oracle = app.add_subcommand("oracle", "Stochastic trajectory simulations");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic noise-injection experiment");
  auto* reproduce = app.add_subcommand("reproduce", "Run the acceptance suite and print a pass/fail table");
  for (auto* s : {fields, trap, chain, budget, fit, oracle, synth, reproduce}) add_common(s);
  bool minimize = false;
  trap->add_flag("--minimize", minimize, "Run gradient minimization with the [shims] groups");
  std::string regime, data;
  fit->add_option("--regime", regime, "dc or rf (fit.regime)");
  fit->add_option("--data", data, "Dataset CSV (fit.data)");
  bool monte_carlo = false;
  budget->add_flag("--monte-carlo", monte_carlo, "Monte-Carlo propagation for the RF term");
  std::string mode;
  oracle->add_option("--mode", mode, "secular, rf or drive (oracle.mode)");
  std::string data_dir;
  std::vector<int> only;
  reproduce->add_option("--data-dir", data_dir, "Directory with the bundled layouts and bundled.cfg");
  reproduce->add_option("--only", only, "Criteria to run")->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    Context ctx(common, out);
    auto& cfg = ctx.cfg();
    if (!regime.empty()) cfg.set("fit.regime", regime);
    if (!data.empty()) cfg.set("fit.data", fs::absolute(data).string());
    if (monte_carlo) cfg.set("budget.monte_carlo", "true");
    if (!mode.empty()) cfg.set("oracle.mode", mode);
    int code = 0;
    if (*fields) code = cmd_fields(ctx);
    if (*trap) code = cmd_trap(ctx, minimize);
    if (*chain) code = cmd_chain(ctx);
    if (*budget) code = cmd_budget(ctx);
    if (*fit) code = cmd_fit(ctx);
    if (*oracle) code = cmd_oracle(ctx);
    if (*synth) code = cmd_synth(ctx);
    if (*reproduce) code = cmd_reproduce(ctx, data_dir, only);
    ctx.finish();
    return code;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace ionheat
