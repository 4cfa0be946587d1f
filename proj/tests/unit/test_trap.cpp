#include <gtest/gtest.h>

#include <cmath>

#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"
#include "ionheat/trap.hpp"
#include "test_support.hpp"

using namespace ionheat;
using namespace ionheat::testing;
using constants::kTwoPi;

TEST(Trap, RfFieldLinearInAmplitude) {
  const auto layout = bundled_layout();
  auto cfg = tuned_config(layout);
  const Vec3 p(3e-6, -20e-6, 40e-6);
  const Vec3 e1 = rf_field_amplitude(layout, cfg, p);
  cfg.rf_amplitude *= 2.0;
  const Vec3 e2 = rf_field_amplitude(layout, cfg, p);
  EXPECT_EQ(e2, 2.0 * e1);
}

TEST(Trap, RfFieldTransverseVanishesOnSymmetryPlane) {
  const auto layout = bundled_layout();
  const auto cfg = tuned_config(layout);
  for (double z : {20e-6, 50e-6, 90e-6}) {
    const Vec3 e = rf_field_amplitude(layout, cfg, {0, 10e-6, z});
    EXPECT_LT(std::abs(e.x()), 1e-12 * e.norm() + 1e-12);
  }
}

TEST(Trap, BundledNullIsDeep) {
  const auto layout = bundled_layout();
  const auto cfg = tuned_config(layout);
  const Vec3 null = find_rf_null(layout, {0, 0, 50e-6});
  EXPECT_NEAR(null.z(), 50e-6, 5e-6);
  const double at_null = rf_field_amplitude(layout, cfg, null).norm();
  const double lateral = rf_field_amplitude(layout, cfg, null + Vec3(5e-6, 0, 0)).norm();
  EXPECT_LT(at_null, 0.01 * lateral);
}

TEST(Trap, BundledOperatingPoint) {
  const auto layout = bundled_layout();
  const auto cfg = tuned_config(layout);
  const auto op = find_equilibrium(layout, cfg);
  EXPECT_NEAR(op.secular_omega[1] / kTwoPi, 1.29e6, 1.29e3);
  EXPECT_NEAR(cfg.rf_omega / op.secular_omega[1], 50.0, 0.05);
  for (double w : op.secular_omega) EXPECT_GT(w, 0.0);
  EXPECT_LT((op.principal_axes.transpose() * op.principal_axes - Mat3::Identity()).norm(), 1e-10);
  EXPECT_NEAR(op.position.x(), 0.0, 1e-12);
  EXPECT_LT(std::abs(op.grad_e0_sq_lab.x()), 1e3);
  // Characteristic distances at the trap site.
  const auto da = characteristic_distance(layout, "A", op.axis(1), op.position);
  EXPECT_GT(da.value, 4e-3);
  EXPECT_LT(da.value, 10e-3);
  const auto drf = characteristic_distance(layout, "RF", op.axis(1), op.position);
  EXPECT_GT(drf.value, 1.0);
}

TEST(Trap, SymmetricLayoutEquilibriumAtNull) {
  const auto layout = symmetric_layout();
  const auto cfg = tuned_config(layout);
  const auto op = find_equilibrium(layout, cfg);
  const Vec3 null = find_rf_null(layout, {0, 0, 50e-6});
  EXPECT_LT((op.position - null).norm(), 1e-10);
  EXPECT_LT(op.grad_e0_sq_lab.norm(), 1e3);
  EXPECT_LT(op.e0_sq, 1e-6);
}

TEST(Trap, StrayFieldDisplacementMatchesHarmonicResponse) {
  const auto layout = bundled_layout();
  auto cfg = tuned_config(layout);
  const auto op0 = find_equilibrium(layout, cfg);
  for (int axis : {0, 2}) {
    const double es = 2.0;  // V/m
    cfg.stray_field = es * op0.axis(axis);
    const auto op = find_equilibrium(layout, cfg);
    const double expected = cfg.species.charge * es /
                            (cfg.species.mass * op0.secular_omega[axis] * op0.secular_omega[axis]);
    const double got = (op.position - op0.position).dot(op0.axis(axis));
    EXPECT_NEAR(got, expected, 0.05 * expected) << axis;
  }
}

TEST(Trap, GradientScalesWithAmplitudeSquared) {
  const auto layout = bundled_layout();
  auto cfg = tuned_config(layout);
  const Vec3 p(1e-6, 2e-6, 47e-6);
  const Vec3 g1 = TrapModel(layout, cfg).grad_e0_sq(p);
  cfg.rf_amplitude *= 1.7;
  const Vec3 g2 = TrapModel(layout, cfg).grad_e0_sq(p);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(g2[i] / g1[i], 1.7 * 1.7, 1e-8);
}

TEST(Trap, HessianFrequenciesMatchPotentialScans) {
  const auto layout = bundled_layout();
  auto cfg = tuned_config(layout);
  cfg.stray_field = {5.0, 0.0, 20.0};
  const auto op = find_equilibrium(layout, cfg);
  const TrapModel model(layout, cfg);
  const double h = 100e-9;
  for (int i = 0; i < 3; ++i) {
    const Vec3 a = op.axis(i);
    // Five-point second derivative of a 1D scan.
    const double u = [&](double s) { return model.potential_energy(op.position + s * a); }(0.0);
    auto f = [&](double s) { return model.potential_energy(op.position + s * a); };
    const double curv = (-f(2 * h) + 16 * f(h) - 30 * u + 16 * f(-h) - f(-2 * h)) / (12 * h * h);
    const double omega = std::sqrt(curv / cfg.species.mass);
    EXPECT_NEAR(omega / op.secular_omega[i], 1.0, 1e-3) << i;
  }
}

TEST(Trap, ExactNullIsMinimumOfFieldSquared) {
  const auto layout = symmetric_layout();
  const auto cfg = tuned_config(layout);
  const TrapModel model(layout, cfg);
  const Vec3 null = find_rf_null(layout, {0, 0, 50e-6});
  const Vec3 g = model.grad_e0_sq(null);
  // Compare against the gradient scale a micrometre away.
  const double scale = model.grad_e0_sq(null + Vec3(0, 0, 1e-6)).norm();
  EXPECT_LT(g.norm(), 1e-9 * scale);
  for (const Vec3& d : {Vec3(1e-6, 0, 0), Vec3(0, 0, 1e-6), Vec3(0, 0, -1e-6)}) {
    EXPECT_GT(model.rf_field(null + d).squaredNorm(), model.rf_field(null).squaredNorm());
  }
}

TEST(Trap, EquilibriumErrors) {
  const auto layout = bundled_layout();
  auto cfg = tuned_config(layout);
  auto far = cfg;
  far.search_center = Vec3(2e-3, 0, 50e-6);
  far.search_half_width = 10e-6;
  EXPECT_THROW(find_equilibrium(layout, far), NumericalError);

  const TrapModel model(layout, cfg);
  // A point on the radial saddle of the DC potential is not a minimum.
  EXPECT_THROW(operating_point_at(model, Vec3(0, 0, 150e-6)), NumericalError);

  auto bad = cfg;
  bad.rf_amplitude = 0.0;
  EXPECT_THROW(find_equilibrium(layout, bad), ValidationError);
  bad = cfg;
  bad.dc_voltages["nope"] = 1.0;
  EXPECT_THROW(find_equilibrium(layout, bad), ValidationError);
}

TEST(Trap, DeterministicAcrossCalls) {
  const auto layout = bundled_layout();
  auto cfg = tuned_config(layout);
  cfg.stray_field = {1.0, 2.0, 30.0};
  const auto a = find_equilibrium(layout, cfg);
  const auto b = find_equilibrium(layout, cfg);
  EXPECT_EQ(a.position, b.position);
}

TEST(Trap, ShimParametrizationProducesRequestedField) {
  const auto layout = bundled_layout();
  const auto cfg = tuned_config(layout);
  const auto op = find_equilibrium(layout, cfg);
  const ShimParametrization shims(layout, {"A", "B", "ML", "MR", "C"}, op.position);
  const Vec3 want(3.0, -2.0, 40.0);
  const auto shimmed = shims.apply(cfg, want);
  const Vec3 delta = TrapModel(layout, shimmed).dc_field(op.position) - TrapModel(layout, cfg).dc_field(op.position);
  EXPECT_LT((delta - want).norm(), 1e-9 * want.norm());
}

TEST(Trap, MinimizeGradientAlreadyMinimized) {
  const auto layout = bundled_layout();
  const auto cfg = tuned_config(layout);
  const auto shims = shims_for(layout, cfg);
  const auto res = minimize_gradient(layout, cfg, shims);
  EXPECT_TRUE(res.already_minimized);
  EXPECT_EQ(res.shim, Vec3::Zero());
  EXPECT_EQ(res.residual_gradient, res.initial_gradient);
  for (const auto& [g, v] : res.dc_offsets) EXPECT_EQ(v, 0.0) << g;
}

TEST(Trap, MinimizeGradientSymmetricLayoutStrayFree) {
  const auto layout = symmetric_layout();
  const auto cfg = tuned_config(layout);
  const auto res = minimize_gradient(layout, cfg, shims_for(layout, cfg));
  EXPECT_TRUE(res.already_minimized);
  EXPECT_LT(res.shim.norm(), 1e-12);
}

TEST(Trap, VerticalStrayCorrectedMainlyByVerticalShim) {
  const auto layout = short_rail_layout();
  auto cfg = tuned_config(layout);
  const auto shims = shims_for(layout, cfg);
  cfg.stray_field = {0.0, 0.0, 100.0};
  const auto res = minimize_gradient(layout, cfg, shims);
  ASSERT_FALSE(res.already_minimized);
  EXPECT_GT(std::abs(res.shim.z()), 2.0 * std::abs(res.shim.x()));
  EXPECT_GT(std::abs(res.shim.z()), 2.0 * std::abs(res.shim.y()));
  EXPECT_LT(std::abs(res.residual_gradient), 0.1 * std::abs(res.initial_gradient));
}

TEST(Trap, MinimizeGradientReducesLargeGradientTenfold) {
  const auto layout = short_rail_layout();
  auto cfg = tuned_config(layout);
  const auto shims = shims_for(layout, cfg);
  // Vertical stray field chosen so the initial axial gradient is about 2e12 V^2/m^3.
  cfg.stray_field = {0.0, 0.0, 420.0};
  const auto res = minimize_gradient(layout, cfg, shims);
  EXPECT_GT(std::abs(res.initial_gradient), 1.5e12);
  EXPECT_LT(std::abs(res.initial_gradient), 3.0e12);
  EXPECT_LE(std::abs(res.residual_gradient), 0.1 * std::abs(res.initial_gradient));
  EXPECT_LE(std::abs(res.operating_point.grad_e0_sq[TrapOperatingPoint::kAxial]),
            0.1 * std::abs(res.initial_gradient));
}

TEST(Trap, AxialGradientZerosAreEnumerated) {
  const auto layout = short_rail_layout();
  auto cfg = tuned_config(layout);
  const auto shims = shims_for(layout, cfg);
  cfg.stray_field = {20.0, 0.0, 300.0};
  const auto res = minimize_gradient(layout, cfg, shims);
  ASSERT_GE(res.candidates.size(), 2u);
  for (const auto& c : res.candidates) {
    EXPECT_LE(std::abs(c.residual), std::max(1e8, 1e-3 * std::abs(res.initial_gradient)));
  }
  // Primary candidate is the one closest to the stray-free equilibrium.
  const double d0 = (res.candidates[0].position - res.reference_position).norm();
  for (const auto& c : res.candidates) EXPECT_LE(d0, (c.position - res.reference_position).norm());
}
