#include "ionheat/fields.hpp"

#include <cmath>
#include <complex>

#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"

namespace ionheat {

namespace {

using constants::kTwoPi;

// Corner term atan(u v / (z R)) of the rectangle potential.
template <typename T>
T corner_potential(T u, T v, T z) {
  using std::atan;
  using std::sqrt;
  const T r = sqrt(u * u + v * v + z * z);
  return atan(u * v / (z * r));
}

// Gradient of the corner term with respect to (u, v, z).
template <typename T>
void corner_gradient(T u, T v, T z, T& du, T& dv, T& dz) {
  using std::sqrt;
  const T u2z2 = u * u + z * z;
  const T v2z2 = v * v + z * z;
  const T r2 = u * u + v * v + z * z;
  const T r = sqrt(r2);
  du = v * z / (r * u2z2);
  dv = u * z / (r * v2z2);
  dz = -u * v * (r2 + z * z) / (r * u2z2 * v2z2);
}

// Field of a unit-voltage rectangle. u_i = x_i - x, so d/dx = -d/du.
template <typename T>
void rect_field(const Rect& rc, const T& x, const T& y, const T& z, T& ex, T& ey, T& ez) {
  ex = ey = ez = T(0.0);
  const double xs[2] = {rc.x_min, rc.x_max};
  const double ys[2] = {rc.y_min, rc.y_max};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double sign = (i == j) ? 1.0 : -1.0;
      T du, dv, dz;
      corner_gradient<T>(T(xs[i]) - x, T(ys[j]) - y, z, du, dv, dz);
      ex += sign * du;
      ey += sign * dv;
      ez -= sign * dz;
    }
  }
  const double k = 1.0 / kTwoPi;
  ex *= k;
  ey *= k;
  ez *= k;
}

double rect_potential(const Rect& rc, const Vec3& p) {
  double phi = corner_potential(rc.x_max - p.x(), rc.y_max - p.y(), p.z()) -
               corner_potential(rc.x_min - p.x(), rc.y_max - p.y(), p.z()) -
               corner_potential(rc.x_max - p.x(), rc.y_min - p.y(), p.z()) +
               corner_potential(rc.x_min - p.x(), rc.y_min - p.y(), p.z());
  return phi / kTwoPi;
}

// Complex-step Jacobian: J(i, j) = Im E_i(p + i h e_j) / h.
Mat3 rect_jacobian(const Rect& rc, const Vec3& p) {
  using C = std::complex<double>;
  constexpr double h = 1e-30;
  Mat3 jac;
  for (int j = 0; j < 3; ++j) {
    C c[3] = {C(p.x()), C(p.y()), C(p.z())};
    c[j] += C(0.0, h);
    C ex, ey, ez;
    rect_field<C>(rc, c[0], c[1], c[2], ex, ey, ez);
    jac(0, j) = ex.imag() / h;
    jac(1, j) = ey.imag() / h;
    jac(2, j) = ez.imag() / h;
  }
  return jac;
}

void require_above_plane(const Vec3& p) {
  if (!(p.z() > 0.0)) throw ValidationError("field point must lie above the electrode plane (z > 0)");
}

}  // namespace

Vec3 rectangle_field(const Rect& rect, const Vec3& p) {
  double ex, ey, ez;
  rect_field<double>(rect, p.x(), p.y(), p.z(), ex, ey, ez);
  return {ex, ey, ez};
}

FieldSample rectangle_basis(const Rect& rect, const Vec3& p) {
  require_above_plane(p);
  return {rect_potential(rect, p), rectangle_field(rect, p)};
}

FieldSample basis_solution(const ElectrodeLayout& layout, std::string_view group, const Vec3& p) {
  require_above_plane(p);
  if (!layout.has_group(group)) throw ValidationError("unknown electrode group '" + std::string(group) + "'");
  FieldSample out;
  for (const auto& rc : layout.group_rects(group)) {
    out.potential += rect_potential(rc, p);
    out.field += rectangle_field(rc, p);
  }
  return out;
}

Mat3 basis_field_jacobian(const ElectrodeLayout& layout, std::string_view group, const Vec3& p) {
  require_above_plane(p);
  if (!layout.has_group(group)) throw ValidationError("unknown electrode group '" + std::string(group) + "'");
  Mat3 jac = Mat3::Zero();
  for (const auto& rc : layout.group_rects(group)) jac += rect_jacobian(rc, p);
  return jac;
}

void WeightedRects::add_group(const ElectrodeLayout& layout, std::string_view group, double weight) {
  for (const auto& rc : layout.group_rects(group)) add(rc, weight);
}

Vec3 WeightedRects::field(const Vec3& p) const {
  double ex = 0.0, ey = 0.0, ez = 0.0;
  for (std::size_t k = 0; k < rects_.size(); ++k) {
    double fx, fy, fz;
    rect_field<double>(rects_[k], p.x(), p.y(), p.z(), fx, fy, fz);
    ex += weights_[k] * fx;
    ey += weights_[k] * fy;
    ez += weights_[k] * fz;
  }
  return {ex, ey, ez};
}

double WeightedRects::potential(const Vec3& p) const {
  double phi = 0.0;
  for (std::size_t k = 0; k < rects_.size(); ++k) phi += weights_[k] * rect_potential(rects_[k], p);
  return phi;
}

Mat3 WeightedRects::jacobian(const Vec3& p) const {
  Mat3 jac = Mat3::Zero();
  for (std::size_t k = 0; k < rects_.size(); ++k) jac += weights_[k] * rect_jacobian(rects_[k], p);
  return jac;
}

CharacteristicDistance characteristic_distance_from_field(const Vec3& field_per_volt,
                                                          const Vec3& axis) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw ValidationError("characteristic distance axis must be non-zero");
  const double component = std::abs(field_per_volt.dot(axis) / n);
  if (!(component > kNoCouplingField)) return {};
  return {1.0 / component, true};
}

CharacteristicDistance characteristic_distance(const ElectrodeLayout& layout,
                                               std::string_view group, const Vec3& axis,
                                               const Vec3& p) {
  return characteristic_distance_from_field(basis_solution(layout, group, p).field, axis);
}

}  // namespace ionheat
