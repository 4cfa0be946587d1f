#pragma once

#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ionheat/species.hpp"

namespace ionheat {

enum class Regime { kDc, kRf };
std::string_view to_string(Regime r);
Regime parse_regime(std::string_view s);

struct HeatingPoint {
  double s = 0.0;           // electrode noise PSD, V^2/Hz
  double s_sigma = 0.0;
  double rate = 0.0;        // quanta/s
  double rate_sigma = 0.0;
};

struct FitContext {
  IonSpecies species;
  double omega = 0.0;         // secular, rad/s
  double rf_omega = 0.0;      // rad/s, RF regime only
  double rf_amplitude = 0.0;  // V, RF regime only
};

struct HeatingDataset {
  Regime regime = Regime::kDc;
  std::vector<HeatingPoint> points;
  FitContext context;

  void validate() const;
};

struct FitResult {
  Regime regime = Regime::kDc;
  double background = 0.0;        // quanta/s
  double background_sigma = 0.0;
  double slope = 0.0;             // quanta/s per V^2/Hz
  double slope_sigma = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  // (background, slope)
  // D in m for the DC regime, d E0^2 / d i in V^2/m^3 for the RF regime.
  double derived = 0.0;
  double derived_sigma = 0.0;
  bool background_clamped = false;
  bool no_coupling = false;  // fitted slope < 0
  double chi2 = 0.0;
  int dof = 0;
  double chi2_per_dof() const { return dof > 0 ? chi2 / dof : 0.0; }
  bool slope_consistent_with_zero(double n_sigma = 1.0) const;
};

// Weighted straight-line fit y = a + b x with effective variance
// sigma_y^2 + b^2 sigma_x^2 (two passes). Covariance is the inverse normal matrix.
FitResult fit_line(const std::vector<HeatingPoint>& points);

FitResult fit_dc(const HeatingDataset& dataset);
FitResult fit_rf(const HeatingDataset& dataset);
FitResult fit_dataset(const HeatingDataset& dataset);

// Dataset CSV: s_v2_per_hz,s_sigma,rate_quanta_per_s,rate_sigma,regime
void write_dataset(std::ostream& out, const HeatingDataset& d);
HeatingDataset read_dataset(std::istream& in, const FitContext& context);
HeatingDataset load_dataset(const std::filesystem::path& path, const FitContext& context);
void save_dataset(const std::filesystem::path& path, const HeatingDataset& d);

}  // namespace ionheat
