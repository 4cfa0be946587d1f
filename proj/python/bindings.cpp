#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ionheat/cli.hpp"
#include "ionheat/config.hpp"
#include "ionheat/errors.hpp"
#include "ionheat/fields.hpp"
#include "ionheat/fit.hpp"
#include "ionheat/geometry.hpp"
#include "ionheat/heating.hpp"
#include "ionheat/noise.hpp"
#include "ionheat/oracle.hpp"
#include "ionheat/species.hpp"
#include "ionheat/synth.hpp"
#include "ionheat/trap.hpp"

namespace py = pybind11;
using namespace ionheat;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Technical-noise heating budget for surface-electrode ion traps";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  py::class_<IonSpecies>(m, "IonSpecies")
      .def(py::init<>())
      .def_readwrite("mass", &IonSpecies::mass)
      .def_readwrite("charge", &IonSpecies::charge);

  py::class_<ElectrodeLayout>(m, "ElectrodeLayout")
      .def_property_readonly("description", &ElectrodeLayout::description)
      .def("groups", &ElectrodeLayout::groups);
  m.def("load_layout", &load_layout, py::arg("path"));

  m.def(
      "basis_solution",
      [](const ElectrodeLayout& layout, const std::string& group, const Vec3& p) {
        const auto s = basis_solution(layout, group, p);
        return py::make_tuple(s.potential, s.field);
      },
      py::arg("layout"), py::arg("group"), py::arg("point"),
      "Potential (V per V) and field ((V/m) per V) of `group` at unit voltage.");

  py::class_<TrapConfig>(m, "TrapConfig")
      .def(py::init<>())
      .def_readwrite("species", &TrapConfig::species)
      .def_readwrite("rf_omega", &TrapConfig::rf_omega)
      .def_readwrite("rf_amplitude", &TrapConfig::rf_amplitude)
      .def_readwrite("dc_voltages", &TrapConfig::dc_voltages)
      .def_readwrite("stray_field", &TrapConfig::stray_field)
      .def_readwrite("search_center", &TrapConfig::search_center)
      .def_readwrite("search_half_width", &TrapConfig::search_half_width);

  py::class_<TrapOperatingPoint>(m, "TrapOperatingPoint")
      .def_readonly("position", &TrapOperatingPoint::position)
      .def_readonly("secular_omega", &TrapOperatingPoint::secular_omega)
      .def_readonly("principal_axes", &TrapOperatingPoint::principal_axes)
      .def_readonly("grad_e0_sq", &TrapOperatingPoint::grad_e0_sq)
      .def_readonly("e0_sq", &TrapOperatingPoint::e0_sq);
  m.def("find_equilibrium", &find_equilibrium, py::arg("layout"), py::arg("config"));

  py::class_<RunConfig>(m, "RunConfig")
      .def_static("load", &RunConfig::load, py::arg("path"))
      .def("set", py::overload_cast<const std::string&, const std::string&>(&RunConfig::set))
      .def("get_string", py::overload_cast<const std::string&>(&RunConfig::get_string, py::const_));
  m.def("layout_from", &layout_from);
  m.def("trap_config_from", &trap_config_from);

  m.def("dc_coupling", &dc_coupling, py::arg("species"), py::arg("omega"), py::arg("distance"));
  m.def("heating_rate_dc", py::overload_cast<const IonSpecies&, double, double, double>(&heating_rate_dc),
        py::arg("species"), py::arg("omega"), py::arg("s_v"), py::arg("distance"));
  m.def("heating_rate_rf", &heating_rate_rf, py::arg("species"), py::arg("omega"), py::arg("rf_omega"),
        py::arg("rf_amplitude"), py::arg("gradient"), py::arg("s_v_rf"));
  m.def("solve_rf_amplitude", &solve_rf_amplitude, py::arg("species"), py::arg("omega"), py::arg("rf_omega"),
        py::arg("gradient"), py::arg("s_v_rf"), py::arg("rate"));

  py::class_<ResonatorParams>(m, "ResonatorParams")
      .def(py::init([](double q, double inductance, double omega) { return ResonatorParams{q, inductance, omega}; }),
           py::arg("q"), py::arg("inductance"), py::arg("omega"));
  m.def("resonator_transfer", &resonator_transfer, py::arg("params"), py::arg("offset_omega"));
  m.def("resonator_voltage_noise", &resonator_voltage_noise, py::arg("params"), py::arg("s_p"),
        py::arg("offset_omega"), py::arg("both_sidebands"));
  m.def("johnson_noise", &johnson_noise, py::arg("resistance"), py::arg("temperature"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("background", &FitResult::background)
      .def_readonly("background_sigma", &FitResult::background_sigma)
      .def_readonly("slope", &FitResult::slope)
      .def_readonly("slope_sigma", &FitResult::slope_sigma)
      .def_readonly("derived", &FitResult::derived)
      .def_readonly("derived_sigma", &FitResult::derived_sigma)
      .def_readonly("chi2", &FitResult::chi2)
      .def_readonly("dof", &FitResult::dof)
      .def_readonly("no_coupling", &FitResult::no_coupling);

  m.def(
      "fit",
      [](const std::string& regime, const std::vector<double>& s, const std::vector<double>& s_sigma,
         const std::vector<double>& rate, const std::vector<double>& rate_sigma, double omega, double rf_omega,
         double rf_amplitude) {
        if (s.size() != rate.size() || s.size() != rate_sigma.size() || s.size() != s_sigma.size()) {
          throw ValidationError("fit: input lengths differ");
        }
        HeatingDataset d;
        d.regime = parse_regime(regime);
        d.context.omega = omega;
        d.context.rf_omega = rf_omega;
        d.context.rf_amplitude = rf_amplitude;
        for (std::size_t i = 0; i < s.size(); ++i) d.points.push_back({s[i], s_sigma[i], rate[i], rate_sigma[i]});
        return fit_dataset(d);
      },
      py::arg("regime"), py::arg("s"), py::arg("s_sigma"), py::arg("rate"), py::arg("rate_sigma"), py::arg("omega"),
      py::arg("rf_omega") = 0.0, py::arg("rf_amplitude") = 0.0);

  m.def(
      "synthesize_dc",
      [](const std::vector<double>& injected, double background, double distance, double omega, double residual,
         int n_shots, std::uint64_t seed) {
        ExperimentPlan plan;
        plan.injected_psd = injected;
        plan.background = background;
        plan.parameter = distance;
        plan.context.omega = omega;
        plan.residual_psd = residual;
        plan.measurement.n_shots = n_shots;
        const auto e = generate_dataset(plan, seed);
        py::dict out;
        std::vector<double> s, s_sigma, rate, rate_sigma;
        for (const auto& p : e.dataset.points) {
          s.push_back(p.s);
          s_sigma.push_back(p.s_sigma);
          rate.push_back(p.rate);
          rate_sigma.push_back(p.rate_sigma);
        }
        out["s"] = s;
        out["s_sigma"] = s_sigma;
        out["rate"] = rate;
        out["rate_sigma"] = rate_sigma;
        out["true_rate"] = e.true_rate;
        return out;
      },
      py::arg("injected_psd"), py::arg("background"), py::arg("distance"), py::arg("omega"),
      py::arg("residual_psd") = 0.0, py::arg("n_shots") = 2000, py::arg("seed") = 1);

  py::class_<EnsembleResult>(m, "EnsembleResult")
      .def_readonly("rate", &EnsembleResult::rate)
      .def_readonly("statistical_sigma", &EnsembleResult::statistical_sigma)
      .def_readonly("n_realizations", &EnsembleResult::n_realizations)
      .def_readonly("predicted_rate", &EnsembleResult::predicted_rate)
      .def_readonly("linearity", &EnsembleResult::linearity);
  m.def(
      "simulate_secular_heating",
      [](double omega, double s_e, double duration, int n_realizations, std::uint64_t seed, int threads) {
        SecularOracleOptions o;
        o.duration = duration;
        o.n_realizations = n_realizations;
        o.seed = seed;
        o.threads = threads;
        py::gil_scoped_release release;
        return simulate_secular_heating(IonSpecies{}, omega, s_e, o);
      },
      py::arg("omega"), py::arg("field_psd"), py::arg("duration"), py::arg("n_realizations") = 200,
      py::arg("seed") = 1, py::arg("threads") = 0);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run a CLI subcommand; returns (exit_code, stdout, stderr).");
  m.attr("bundled_config") = std::string(IONHEAT_DATA_DIR) + "/bundled.cfg";
}
