#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ionheat/fields.hpp"
#include "ionheat/geometry.hpp"
#include "ionheat/species.hpp"

namespace ionheat {

struct TrapConfig {
  IonSpecies species;
  double rf_omega = 0.0;      // rad/s
  double rf_amplitude = 0.0;  // V, peak
  std::map<std::string, double> dc_voltages;  // group -> V
  Vec3 stray_field = Vec3::Zero();             // V/m, uniform
  std::optional<Vec3> search_center;           // default (0, 0, ion height hint)
  double search_half_width = 60e-6;            // m

  void validate(const ElectrodeLayout& layout) const;
  Vec3 center(const ElectrodeLayout& layout) const;
};

// Total potential energy of the ion in the pseudopotential approximation:
//   U = q^2 |E0|^2 / (4 m Omega^2) + q phi_dc - q E_stray . r
class TrapModel {
 public:
  TrapModel(const ElectrodeLayout& layout, const TrapConfig& config);

  double potential_energy(const Vec3& p) const;  // J
  Vec3 energy_gradient(const Vec3& p) const;     // J/m
  Mat3 energy_hessian(const Vec3& p) const;      // J/m^2

  Vec3 rf_field(const Vec3& p) const;     // E0 at V0, V/m
  Mat3 rf_jacobian(const Vec3& p) const;  // dE0_i/dx_j
  Vec3 grad_e0_sq(const Vec3& p) const;   // lab frame, V^2/m^3
  Vec3 dc_field(const Vec3& p) const;     // DC electrodes + stray

  const TrapConfig& config() const { return config_; }
  const ElectrodeLayout& layout() const { return *layout_; }
  double pseudo_prefactor() const { return pseudo_prefactor_; }

 private:
  const ElectrodeLayout* layout_;
  TrapConfig config_;
  WeightedRects rf_;  // weight V0
  WeightedRects dc_;
  double pseudo_prefactor_;  // q^2 / (4 m Omega^2)
};

struct TrapOperatingPoint {
  Vec3 position = Vec3::Zero();
  // Index i follows the lab axis the principal axis is closest to (x, y, z).
  std::array<double, 3> secular_omega{};  // rad/s
  Mat3 principal_axes = Mat3::Identity();   // columns, orthonormal
  Vec3 grad_e0_sq = Vec3::Zero();           // along principal axes, V^2/m^3
  Vec3 grad_e0_sq_lab = Vec3::Zero();
  double e0_sq = 0.0;                       // V^2/m^2
  double potential_energy = 0.0;            // J

  Vec3 axis(int i) const { return principal_axes.col(i); }
  static constexpr int kAxial = 1;
};

Vec3 rf_field_amplitude(const ElectrodeLayout& layout, const TrapConfig& config, const Vec3& p);

// Operating point quantities (Hessian, principal axes, gradients) at a given position.
TrapOperatingPoint operating_point_at(const TrapModel& model, const Vec3& p);

// Multi-start quasi-Newton search for the lowest local minimum inside the search box.
TrapOperatingPoint find_equilibrium(const ElectrodeLayout& layout, const TrapConfig& config);
// Local descent from `start` only.
TrapOperatingPoint refine_equilibrium(const ElectrodeLayout& layout, const TrapConfig& config,
                                      const Vec3& start);

// Point in the radial plane y = start.y() minimising |E_rf|, i.e. where the
// radial RF field components vanish.
Vec3 find_rf_null(const ElectrodeLayout& layout, const Vec3& start);

// Group voltages (minimum norm) giving zero DC field at `position` and axial
// secular frequency `axial_omega` (pseudopotential axial curvature included).
// Each entry of `tied_groups` is a set of groups driven with one common voltage.
std::map<std::string, double> design_axial_confinement(
    const ElectrodeLayout& layout, const TrapConfig& config,
    const std::vector<std::vector<std::string>>& tied_groups, double axial_omega,
    const Vec3& position);

// Linear map from a desired uniform shim field at the ion (V/m) to DC voltage
// offsets on the chosen groups (minimum-norm pseudo-inverse of the group fields).
class ShimParametrization {
 public:
  ShimParametrization(const ElectrodeLayout& layout, std::vector<std::string> groups,
                      const Vec3& position);
  std::map<std::string, double> offsets(const Vec3& shim) const;
  TrapConfig apply(const TrapConfig& base, const Vec3& shim) const;
  const std::vector<std::string>& groups() const { return groups_; }

 private:
  std::vector<std::string> groups_;
  Eigen::MatrixXd volts_per_field_;  // groups x 3
};

struct AxialGradientZero {
  Vec3 shim = Vec3::Zero();
  Vec3 position = Vec3::Zero();
  double residual = 0.0;  // V^2/m^3
};

struct GradientMinimizationOptions {
  double abs_tolerance = 1e8;  // V^2/m^3
  double rel_tolerance = 1e-3;
  int max_iterations = 60;
  double fd_step = 1.0;        // V/m
  double start_spread = 0.0;   // V/m; 0 selects max(|stray|, 50 V/m)
};

struct GradientMinimization {
  Vec3 shim = Vec3::Zero();
  std::map<std::string, double> dc_offsets;
  double initial_gradient = 0.0;   // d_y E0^2 before, V^2/m^3
  double residual_gradient = 0.0;  // after
  bool already_minimized = false;
  int iterations = 0;
  TrapOperatingPoint initial;
  TrapOperatingPoint operating_point;
  Vec3 reference_position = Vec3::Zero();  // stray-free, unshimmed equilibrium
  std::vector<AxialGradientZero> candidates;
};

GradientMinimization minimize_gradient(const ElectrodeLayout& layout, const TrapConfig& config,
                                       const ShimParametrization& shims,
                                       const GradientMinimizationOptions& options = {});

}  // namespace ionheat
