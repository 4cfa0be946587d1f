#pragma once

#include <limits>
#include <string_view>

#include <Eigen/Core>

#include "ionheat/geometry.hpp"

namespace ionheat {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Potential (per volt) and field ((V/m) per volt) at a point.
struct FieldSample {
  double potential = 0.0;
  Vec3 field = Vec3::Zero();
};

// Closed-form solution for one rectangle held at 1 V in an otherwise grounded,
// gapless plane z = 0. Requires p.z() > 0.
FieldSample rectangle_basis(const Rect& rect, const Vec3& p);
Vec3 rectangle_field(const Rect& rect, const Vec3& p);

// Sum over all electrodes of `group` at unit voltage.
// Throws ValidationError for an unknown group or p.z() <= 0.
FieldSample basis_solution(const ElectrodeLayout& layout, std::string_view group, const Vec3& p);

// d E_i / d x_j of the unit-voltage basis field of `group` (complex-step, exact to rounding).
Mat3 basis_field_jacobian(const ElectrodeLayout& layout, std::string_view group, const Vec3& p);

// Rectangles with weights, for hot loops that need the combined field of many
// electrodes at fixed voltages.
class WeightedRects {
 public:
  void add(const Rect& r, double weight) {
    rects_.push_back(r);
    weights_.push_back(weight);
  }
  void add_group(const ElectrodeLayout& layout, std::string_view group, double weight);
  Vec3 field(const Vec3& p) const;
  double potential(const Vec3& p) const;
  Mat3 jacobian(const Vec3& p) const;
  bool empty() const { return rects_.empty(); }

 private:
  std::vector<Rect> rects_;
  std::vector<double> weights_;
};

// D = V / |E . axis| for unit voltage on `group`. A vanishing field component
// is a legitimate outcome (symmetric electrodes) and is reported as `coupled == false`.
struct CharacteristicDistance {
  double value = std::numeric_limits<double>::infinity();  // metres
  bool coupled = false;
};

// Field components below this (V/m per V, i.e. D above 1e9 m) count as no coupling.
inline constexpr double kNoCouplingField = 1e-9;

CharacteristicDistance characteristic_distance_from_field(const Vec3& field_per_volt,
                                                          const Vec3& axis);
CharacteristicDistance characteristic_distance(const ElectrodeLayout& layout,
                                               std::string_view group, const Vec3& axis,
                                               const Vec3& p);

}  // namespace ionheat
