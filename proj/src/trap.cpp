#include "ionheat/trap.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "ionheat/errors.hpp"

namespace ionheat {

namespace {

constexpr double kLengthScale = 1e-6;  // optimiser coordinates in micrometres
constexpr double kHessianStep = 2e-9;  // m

struct BoxProblem {
  const TrapModel* model;
  Vec3 center;
  double half_width;
  double energy_scale;
  bool escaped = false;
};

bool inside(const BoxProblem& bp, const Vec3& p, double factor) {
  if (!(p.z() > 0.02 * bp.model->layout().ion_height_hint())) return false;
  return ((p - bp.center).cwiseAbs().maxCoeff() <= factor * bp.half_width);
}

Vec3 unscale(const BoxProblem& bp, const gsl_vector* x) {
  return bp.center + kLengthScale * Vec3(gsl_vector_get(x, 0), gsl_vector_get(x, 1), gsl_vector_get(x, 2));
}

// Outside the enlarged box the objective is replaced by a steep bowl pointing
// back to the centre so line searches stay finite.
double box_f(const gsl_vector* x, void* params) {
  auto* bp = static_cast<BoxProblem*>(params);
  const Vec3 p = unscale(*bp, x);
  if (!inside(*bp, p, 2.0)) {
    bp->escaped = true;
    return 1e6 * (1.0 + ((p - bp->center) / kLengthScale).squaredNorm());
  }
  return bp->model->potential_energy(p) / bp->energy_scale;
}

void box_df(const gsl_vector* x, void* params, gsl_vector* g) {
  auto* bp = static_cast<BoxProblem*>(params);
  const Vec3 p = unscale(*bp, x);
  Vec3 grad;
  if (!inside(*bp, p, 2.0)) {
    bp->escaped = true;
    grad = 2e6 * (p - bp->center) / kLengthScale;
  } else {
    grad = bp->model->energy_gradient(p) * kLengthScale / bp->energy_scale;
  }
  for (int i = 0; i < 3; ++i) gsl_vector_set(g, i, grad[i]);
}

void box_fdf(const gsl_vector* x, void* params, double* f, gsl_vector* g) {
  *f = box_f(x, params);
  box_df(x, params, g);
}

double gradient_tolerance(const TrapModel& model) {
  // 1e-6 of the characteristic force q * (1 V) / h.
  return 1e-6 * model.config().species.charge / model.layout().ion_height_hint();
}

// Damped Newton polish; returns nullopt if the Hessian is not positive definite.
std::optional<Vec3> newton_polish(const TrapModel& model, Vec3 p) {
  for (int it = 0; it < 30; ++it) {
    const Vec3 g = model.energy_gradient(p);
    const Mat3 h = model.energy_hessian(p);
    Eigen::LLT<Mat3> llt(h);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Vec3 step = -llt.solve(g);
    const double step_cap = 5e-6;
    if (step.norm() > step_cap) step *= step_cap / step.norm();
    const double u0 = model.potential_energy(p);
    double t = 1.0;
    Vec3 trial = p + step;
    while (t > 1e-4 && trial.z() > 0.0 && model.potential_energy(trial) > u0 &&
           model.energy_gradient(trial).norm() > g.norm()) {
      t *= 0.5;
      trial = p + t * step;
    }
    if (!(trial.z() > 0.0)) return std::nullopt;
    p = trial;
    if ((t * step).norm() < 1e-15) break;
  }
  return p;
}

std::optional<Vec3> local_minimum(const TrapModel& model, const Vec3& start, const Vec3& center,
                                  double half_width) {
  BoxProblem bp{&model, center, half_width, model.config().species.charge};
  gsl_multimin_function_fdf fn;
  fn.n = 3;
  fn.f = &box_f;
  fn.df = &box_df;
  fn.fdf = &box_fdf;
  fn.params = &bp;

  gsl_vector* x = gsl_vector_alloc(3);
  const Vec3 s = (start - center) / kLengthScale;
  for (int i = 0; i < 3; ++i) gsl_vector_set(x, i, s[i]);
  gsl_multimin_fdfminimizer* m = gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, 3);
  gsl_multimin_fdfminimizer_set(m, &fn, x, 1.0, 0.1);
  for (int it = 0; it < 300 && !bp.escaped; ++it) {
    if (gsl_multimin_fdfminimizer_iterate(m) != GSL_SUCCESS) break;
    if (gsl_multimin_test_gradient(m->gradient, 1e-12) == GSL_SUCCESS) break;
  }
  Vec3 p = unscale(bp, m->x);
  gsl_multimin_fdfminimizer_free(m);
  gsl_vector_free(x);

  if (bp.escaped || !inside(bp, p, 1.0)) return std::nullopt;
  auto polished = newton_polish(model, p);
  if (!polished || !inside(bp, *polished, 1.0)) return std::nullopt;
  if (!(model.energy_gradient(*polished).norm() <= gradient_tolerance(model))) return std::nullopt;
  return polished;
}

// Permutation assigning each eigenvector to the lab axis it is most aligned with.
std::array<int, 3> match_lab_axes(const Mat3& vecs) {
  std::array<int, 3> perm{0, 1, 2};
  std::array<int, 3> best = perm;
  double best_score = -1.0;
  do {
    double score = 1.0;
    for (int k = 0; k < 3; ++k) score *= std::abs(vecs(k, perm[k]));
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;  // lab axis k <- eigenvector best[k]
}

bool lex_less(const Vec3& a, const Vec3& b) {
  return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
}

}  // namespace

void TrapConfig::validate(const ElectrodeLayout& layout) const {
  species.validate();
  if (!(rf_omega > 0.0)) throw ValidationError("rf_omega must be positive");
  if (!(rf_amplitude > 0.0)) throw ValidationError("rf_amplitude must be positive");
  if (!(search_half_width > 0.0)) throw ValidationError("search_half_width must be positive");
  for (const auto& [group, v] : dc_voltages) {
    if (!layout.has_group(group)) throw ValidationError("dc voltage given for unknown group '" + group + "'");
    if (group == layout.rf_group()) throw ValidationError("dc voltage given for the RF group '" + group + "'");
    if (!std::isfinite(v)) throw ValidationError("dc voltage for group '" + group + "' is not finite");
  }
  if (!stray_field.allFinite()) throw ValidationError("stray_field is not finite");
}

Vec3 TrapConfig::center(const ElectrodeLayout& layout) const {
  return search_center.value_or(Vec3(0.0, 0.0, layout.ion_height_hint()));
}

TrapModel::TrapModel(const ElectrodeLayout& layout, const TrapConfig& config)
    : layout_(&layout), config_(config) {
  config_.validate(layout);
  rf_.add_group(layout, layout.rf_group(), config_.rf_amplitude);
  for (const auto& [group, v] : config_.dc_voltages) {
    if (v != 0.0) dc_.add_group(layout, group, v);
  }
  const double q = config_.species.charge;
  pseudo_prefactor_ = q * q / (4.0 * config_.species.mass * config_.rf_omega * config_.rf_omega);
}

Vec3 TrapModel::rf_field(const Vec3& p) const { return rf_.field(p); }
Mat3 TrapModel::rf_jacobian(const Vec3& p) const { return rf_.jacobian(p); }

Vec3 TrapModel::grad_e0_sq(const Vec3& p) const {
  return 2.0 * rf_.jacobian(p).transpose() * rf_.field(p);
}

Vec3 TrapModel::dc_field(const Vec3& p) const { return dc_.field(p) + config_.stray_field; }

double TrapModel::potential_energy(const Vec3& p) const {
  if (!(p.z() > 0.0)) throw ValidationError("field point must lie above the electrode plane (z > 0)");
  const double q = config_.species.charge;
  return pseudo_prefactor_ * rf_.field(p).squaredNorm() + q * dc_.potential(p) -
         q * config_.stray_field.dot(p);
}

Vec3 TrapModel::energy_gradient(const Vec3& p) const {
  if (!(p.z() > 0.0)) throw ValidationError("field point must lie above the electrode plane (z > 0)");
  const double q = config_.species.charge;
  return pseudo_prefactor_ * grad_e0_sq(p) - q * dc_field(p);
}

Mat3 TrapModel::energy_hessian(const Vec3& p) const {
  Mat3 h;
  for (int j = 0; j < 3; ++j) {
    Vec3 d = Vec3::Zero();
    d[j] = kHessianStep;
    h.col(j) = (energy_gradient(p + d) - energy_gradient(p - d)) / (2.0 * kHessianStep);
  }
  return 0.5 * (h + h.transpose());
}

Vec3 rf_field_amplitude(const ElectrodeLayout& layout, const TrapConfig& config, const Vec3& p) {
  if (!(config.rf_amplitude > 0.0)) throw ValidationError("rf_amplitude must be positive");
  return config.rf_amplitude * basis_solution(layout, layout.rf_group(), p).field;
}

TrapOperatingPoint operating_point_at(const TrapModel& model, const Vec3& p) {
  const Mat3 h = model.energy_hessian(p);
  Eigen::SelfAdjointEigenSolver<Mat3> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("Hessian eigen-decomposition failed");
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw NumericalError("Hessian at the equilibrium is not positive definite (unstable trap)");
  }
  const auto perm = match_lab_axes(es.eigenvectors());
  TrapOperatingPoint op;
  op.position = p;
  const double m = model.config().species.mass;
  for (int k = 0; k < 3; ++k) {
    Vec3 v = es.eigenvectors().col(perm[k]);
    if (v[k] < 0.0) v = -v;
    op.principal_axes.col(k) = v;
    op.secular_omega[k] = std::sqrt(es.eigenvalues()[perm[k]] / m);
  }
  op.grad_e0_sq_lab = model.grad_e0_sq(p);
  op.grad_e0_sq = op.principal_axes.transpose() * op.grad_e0_sq_lab;
  op.e0_sq = model.rf_field(p).squaredNorm();
  op.potential_energy = model.potential_energy(p);
  return op;
}

TrapOperatingPoint find_equilibrium(const ElectrodeLayout& layout, const TrapConfig& config) {
  const TrapModel model(layout, config);
  const Vec3 center = config.center(layout);
  const double hw = config.search_half_width;
  std::vector<Vec3> found;
  const double offsets[3] = {-0.5, 0.0, 0.5};
  for (double ox : offsets) {
    for (double oy : offsets) {
      for (double oz : offsets) {
        Vec3 start = center + hw * Vec3(ox, oy, oz);
        if (!(start.z() > 0.1 * layout.ion_height_hint())) continue;
        auto p = local_minimum(model, start, center, hw);
        if (p) found.push_back(*p);
      }
    }
  }
  if (found.empty()) throw NumericalError("no potential minimum found inside the search box");
  std::vector<double> energy;
  for (const auto& p : found) energy.push_back(model.potential_energy(p));
  std::size_t best = 0;
  for (std::size_t i = 1; i < found.size(); ++i) {
    const double tol = 1e-12 * std::max(std::abs(energy[i]), std::abs(energy[best])) + 1e-40;
    if (energy[i] < energy[best] - tol ||
        (std::abs(energy[i] - energy[best]) <= tol && lex_less(found[i], found[best]))) {
      best = i;
    }
  }
  return operating_point_at(model, found[best]);
}

TrapOperatingPoint refine_equilibrium(const ElectrodeLayout& layout, const TrapConfig& config,
                                      const Vec3& start) {
  const TrapModel model(layout, config);
  std::optional<Vec3> p = newton_polish(model, start);
  if (!p || !(model.energy_gradient(*p).norm() <= gradient_tolerance(model))) {
    p = local_minimum(model, start, config.center(layout), config.search_half_width);
  }
  if (!p) throw NumericalError("local equilibrium search did not converge");
  return operating_point_at(model, *p);
}

Vec3 find_rf_null(const ElectrodeLayout& layout, const Vec3& start) {
  Vec3 p = start;
  const auto& rf = layout.rf_group();
  for (int it = 0; it < 100; ++it) {
    const Vec3 e = basis_solution(layout, rf, p).field;
    const Mat3 j = basis_field_jacobian(layout, rf, p);
    Eigen::Matrix2d a;
    a << j(0, 0), j(0, 2), j(2, 0), j(2, 2);
    const Eigen::Vector2d r(e.x(), e.z());
    Eigen::Vector2d step = -a.colPivHouseholderQr().solve(r);
    const double cap = 0.2 * p.z();
    if (step.norm() > cap) step *= cap / step.norm();
    p.x() += step[0];
    p.z() += step[1];
    if (!(p.z() > 0.0)) throw NumericalError("RF null search left the region above the electrodes");
    if (step.norm() < 1e-16) break;
  }
  const Vec3 e = basis_solution(layout, rf, p).field;
  if (std::hypot(e.x(), e.z()) > 1e-6 * std::max(1.0, e.norm()) && std::hypot(e.x(), e.z()) > 1e-3) {
    throw NumericalError("RF null search did not converge");
  }
  return p;
}

std::map<std::string, double> design_axial_confinement(
    const ElectrodeLayout& layout, const TrapConfig& config,
    const std::vector<std::vector<std::string>>& groups, double axial_omega,
    const Vec3& position) {
  if (groups.empty()) throw ValidationError("no DC groups given for the axial design");
  if (!(axial_omega > 0.0)) throw ValidationError("axial frequency must be positive");
  TrapConfig rf_only = config;
  rf_only.dc_voltages.clear();
  rf_only.stray_field.setZero();
  const TrapModel pseudo(layout, rf_only);
  const double q = config.species.charge;
  const double target = config.species.mass * axial_omega * axial_omega -
                        pseudo.energy_hessian(position)(1, 1);

  const auto n = static_cast<Eigen::Index>(groups.size());
  Eigen::MatrixXd a(4, n);
  Eigen::VectorXd b(4);
  for (Eigen::Index k = 0; k < n; ++k) {
    Vec3 e = Vec3::Zero();
    Mat3 j = Mat3::Zero();
    for (const auto& g : groups[k]) {
      if (g == layout.rf_group()) throw ValidationError("the RF group cannot be a DC design group");
      e += basis_solution(layout, g, position).field;
      j += basis_field_jacobian(layout, g, position);
    }
    a.block<3, 1>(0, k) = e;
    a(3, k) = -q * j(1, 1);
  }
  b.head<3>() = -config.stray_field;
  b[3] = target;
  // Row scaling keeps the field and curvature equations comparable. Field rows
  // that vanish by symmetry are dropped rather than amplified.
  const double field_scale = a.topRows<3>().norm();
  for (int r = 0; r < 4; ++r) {
    const double s = a.row(r).norm();
    if (r < 3 && s <= 1e-9 * field_scale) {
      a.row(r).setZero();
      b[r] = 0.0;
    } else if (s > 0.0) {
      a.row(r) /= s;
      b[r] /= s;
    }
  }
  const Eigen::VectorXd v = a.completeOrthogonalDecomposition().solve(b);
  std::map<std::string, double> out;
  for (Eigen::Index k = 0; k < n; ++k) {
    for (const auto& g : groups[k]) out[g] = v[k];
  }
  return out;
}

ShimParametrization::ShimParametrization(const ElectrodeLayout& layout,
                                         std::vector<std::string> groups, const Vec3& position)
    : groups_(std::move(groups)) {
  if (groups_.empty()) throw ValidationError("shim parametrization needs at least one group");
  const auto n = static_cast<Eigen::Index>(groups_.size());
  Eigen::MatrixXd f(3, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (groups_[k] == layout.rf_group()) throw ValidationError("the RF group cannot be a shim group");
    f.col(k) = basis_solution(layout, groups_[k], position).field;
  }
  volts_per_field_ = f.completeOrthogonalDecomposition().pseudoInverse();
}

std::map<std::string, double> ShimParametrization::offsets(const Vec3& shim) const {
  const Eigen::VectorXd v = volts_per_field_ * shim;
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < groups_.size(); ++k) out[groups_[k]] = v[static_cast<Eigen::Index>(k)];
  return out;
}

TrapConfig ShimParametrization::apply(const TrapConfig& base, const Vec3& shim) const {
  TrapConfig cfg = base;
  for (const auto& [group, dv] : offsets(shim)) cfg.dc_voltages[group] += dv;
  return cfg;
}

namespace {

struct AxialObjective {
  const ElectrodeLayout& layout;
  const TrapConfig& config;
  const ShimParametrization& shims;
  Vec3 warm;

  TrapOperatingPoint eval(const Vec3& s) {
    TrapOperatingPoint op = refine_equilibrium(layout, shims.apply(config, s), warm);
    warm = op.position;
    return op;
  }
};

}  // namespace

GradientMinimization minimize_gradient(const ElectrodeLayout& layout, const TrapConfig& config,
                                       const ShimParametrization& shims,
                                       const GradientMinimizationOptions& options) {
  GradientMinimization out;
  TrapConfig clean = config;
  clean.stray_field.setZero();
  out.reference_position = find_equilibrium(layout, clean).position;
  out.initial = find_equilibrium(layout, config);
  out.operating_point = out.initial;
  const int ax = TrapOperatingPoint::kAxial;
  out.initial_gradient = out.initial.grad_e0_sq[ax];
  out.residual_gradient = out.initial_gradient;
  const double tol = std::max(options.abs_tolerance, options.rel_tolerance * std::abs(out.initial_gradient));
  if (std::abs(out.initial_gradient) <= options.abs_tolerance) {
    out.already_minimized = true;
    out.dc_offsets = shims.offsets(Vec3::Zero());
    out.candidates.push_back({Vec3::Zero(), out.initial.position, out.initial_gradient});
    return out;
  }

  const double spread = options.start_spread > 0.0 ? options.start_spread
                                                   : std::max(config.stray_field.norm(), 50.0);
  std::vector<Vec3> starts{Vec3::Zero()};
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = spread;
    starts.push_back(e);
    starts.push_back(-e);
  }

  struct Found {
    AxialGradientZero zero;
    TrapOperatingPoint op;
  };
  std::vector<Found> found;
  int total_iterations = 0;
  for (const auto& s0 : starts) {
    AxialObjective obj{layout, config, shims, out.initial.position};
    Vec3 s = s0;
    TrapOperatingPoint op;
    try {
      op = obj.eval(s);
    } catch (const NumericalError&) {
      continue;
    }
    double r = op.grad_e0_sq[ax];
    bool ok = std::abs(r) <= tol;
    for (int it = 0; it < options.max_iterations && !ok; ++it) {
      ++total_iterations;
      Vec3 jac;
      try {
        const Vec3 base_pos = op.position;
        for (int k = 0; k < 3; ++k) {
          Vec3 d = Vec3::Zero();
          d[k] = options.fd_step;
          obj.warm = base_pos;
          const double rp = obj.eval(s + d).grad_e0_sq[ax];
          obj.warm = base_pos;
          const double rm = obj.eval(s - d).grad_e0_sq[ax];
          jac[k] = (rp - rm) / (2.0 * options.fd_step);
        }
        obj.warm = base_pos;
      } catch (const NumericalError&) {
        break;
      }
      if (!(jac.squaredNorm() > 0.0)) break;
      const Vec3 step = -r * jac / jac.squaredNorm();
      double t = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 12; ++ls) {
        try {
          obj.warm = op.position;
          TrapOperatingPoint trial = obj.eval(s + t * step);
          if (std::abs(trial.grad_e0_sq[ax]) < std::abs(r)) {
            s += t * step;
            op = trial;
            r = trial.grad_e0_sq[ax];
            improved = true;
            break;
          }
        } catch (const NumericalError&) {
        }
        t *= 0.5;
      }
      if (!improved) break;
      ok = std::abs(r) <= tol;
    }
    if (!ok) continue;
    const bool duplicate = std::any_of(found.begin(), found.end(), [&](const Found& f) {
      return (f.zero.position - op.position).norm() < 1e-9;
    });
    if (!duplicate) found.push_back({{s, op.position, r}, op});
  }
  out.iterations = total_iterations;
  if (found.empty()) throw NumericalError("gradient minimization did not converge within the iteration budget");

  std::sort(found.begin(), found.end(), [&](const Found& a, const Found& b) {
    const double da = (a.zero.position - out.reference_position).norm();
    const double db = (b.zero.position - out.reference_position).norm();
    if (da != db) return da < db;
    return lex_less(a.zero.position, b.zero.position);
  });
  for (const auto& f : found) out.candidates.push_back(f.zero);
  out.shim = found.front().zero.shim;
  out.dc_offsets = shims.offsets(out.shim);
  out.residual_gradient = found.front().zero.residual;
  out.operating_point = found.front().op;
  return out;
}

}  // namespace ionheat
