#pragma once

#include <string>

#include "ionheat/constants.hpp"
#include "ionheat/geometry.hpp"
#include "ionheat/trap.hpp"

namespace ionheat::testing {

inline ElectrodeLayout bundled_layout() {
  return load_layout(std::string(IONHEAT_DATA_DIR) + "/surface_trap_approx.layout");
}

inline ElectrodeLayout bundled_short_rail_layout() {
  return load_layout(std::string(IONHEAT_DATA_DIR) + "/short_rail_approx.layout");
}

// Bundled layout with the rails cut short at y_min, which makes the RF null
// strongly end-affected and the axial pseudopotential gradient large off-null.
inline ElectrodeLayout short_rail_layout(double y_min = -300e-6) {
  auto es = bundled_layout().electrodes();
  for (auto& e : es) {
    if (e.id == "C" || e.id == "RF_L" || e.id == "RF_R") e.extent.y_min = y_min;
  }
  return ElectrodeLayout(es, 50e-6, "short rails");
}

// Bundled layout with both rail ends pushed far away: exact mirror symmetry in x and y.
inline ElectrodeLayout symmetric_layout() {
  auto es = bundled_layout().electrodes();
  for (auto& e : es) {
    if (e.id == "C" || e.id == "RF_L" || e.id == "RF_R") {
      e.extent.y_min = -3e-3;
      e.extent.y_max = 3e-3;
    }
  }
  return ElectrodeLayout(es, 50e-6, "symmetric");
}

inline TrapConfig tuned_config(const ElectrodeLayout& layout, double v0 = 49.6) {
  TrapConfig cfg;
  cfg.rf_omega = constants::kTwoPi * 64.5e6;
  cfg.rf_amplitude = v0;
  const Vec3 null = find_rf_null(layout, {0, 0, layout.ion_height_hint()});
  cfg.dc_voltages = design_axial_confinement(layout, cfg, {{"A"}, {"B"}, {"ML", "MR"}, {"C"}},
                                             constants::kTwoPi * 1.29e6, null);
  cfg.search_center = null;
  return cfg;
}

inline ShimParametrization shims_for(const ElectrodeLayout& layout, const TrapConfig& cfg) {
  return ShimParametrization(layout, {"A", "B", "ML", "MR", "C"}, find_equilibrium(layout, cfg).position);
}

}  // namespace ionheat::testing
