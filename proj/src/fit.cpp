#include "ionheat/fit.hpp"

#include <boost/algorithm/string.hpp>
#include <cmath>
#include <fstream>
#include <limits>

#include "ionheat/errors.hpp"
#include "ionheat/heating.hpp"

namespace ionheat {

namespace {

constexpr const char* kDatasetHeader = "s_v2_per_hz,s_sigma,rate_quanta_per_s,rate_sigma,regime";

struct Sums {
  double w = 0, x = 0, y = 0, xx = 0, xy = 0;
};

double parse_field(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("dataset line " + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

}  // namespace

std::string_view to_string(Regime r) { return r == Regime::kDc ? "dc" : "rf"; }

Regime parse_regime(std::string_view s) {
  if (s == "dc") return Regime::kDc;
  if (s == "rf") return Regime::kRf;
  throw ParseError("regime must be 'dc' or 'rf', got '" + std::string(s) + "'");
}

void HeatingDataset::validate() const {
  context.species.validate();
  if (!(context.omega > 0.0)) throw ValidationError("dataset context needs a positive secular frequency");
  if (regime == Regime::kRf && (!(context.rf_omega > 0.0) || !(context.rf_amplitude > 0.0))) {
    throw ValidationError("RF dataset context needs positive rf_omega and rf_amplitude");
  }
  for (const auto& p : points) {
    if (!(p.s >= 0.0) || !(p.rate >= 0.0)) throw ValidationError("dataset PSDs and rates must be >= 0");
    if (!(p.rate_sigma > 0.0)) throw ValidationError("dataset rate uncertainties must be > 0");
    if (!(p.s_sigma >= 0.0)) throw ValidationError("dataset PSD uncertainties must be >= 0");
  }
}

bool FitResult::slope_consistent_with_zero(double n_sigma) const {
  return slope <= n_sigma * slope_sigma;
}

FitResult fit_line(const std::vector<HeatingPoint>& points) {
  if (points.size() < 3) throw ValidationError("fit needs at least 3 points");
  double x_scale = 0.0;
  for (const auto& p : points) {
    if (!(p.rate_sigma > 0.0)) throw ValidationError("fit needs rate uncertainties > 0");
    x_scale = std::max(x_scale, std::abs(p.s));
  }
  bool all_equal = true;
  for (const auto& p : points) all_equal &= (p.s == points.front().s);
  if (all_equal || !(x_scale > 0.0)) throw ValidationError("singular fit: all PSD values are equal");

  // Work in x / x_scale for conditioning.
  double a = 0.0, b = 0.0;
  Eigen::Matrix2d cov;
  std::vector<double> w(points.size());
  for (int pass = 0; pass < 2; ++pass) {
    Sums s;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      const double sx = p.s_sigma / x_scale;
      const double var = p.rate_sigma * p.rate_sigma + (pass == 0 ? 0.0 : b * b * sx * sx);
      w[i] = 1.0 / var;
      const double x = p.s / x_scale;
      s.w += w[i];
      s.x += w[i] * x;
      s.y += w[i] * p.rate;
      s.xx += w[i] * x * x;
      s.xy += w[i] * x * p.rate;
    }
    const double det = s.w * s.xx - s.x * s.x;
    if (!(det > 0.0)) throw ValidationError("singular fit design");
    a = (s.xx * s.y - s.x * s.xy) / det;
    b = (s.w * s.xy - s.x * s.y) / det;
    cov << s.xx / det, -s.x / det, -s.x / det, s.w / det;
  }

  FitResult r;
  r.background = a;
  r.background_sigma = std::sqrt(cov(0, 0));
  if (a < 0.0) {
    // Refit the slope through the origin.
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double x = points[i].s / x_scale;
      sxx += w[i] * x * x;
      sxy += w[i] * x * points[i].rate;
    }
    r.background = 0.0;
    r.background_clamped = true;
    b = sxy / sxx;
    cov(1, 1) = 1.0 / sxx;
    cov(0, 1) = cov(1, 0) = 0.0;
  }
  r.slope = b / x_scale;
  r.slope_sigma = std::sqrt(cov(1, 1)) / x_scale;
  r.covariance << cov(0, 0), cov(0, 1) / x_scale, cov(1, 0) / x_scale, cov(1, 1) / (x_scale * x_scale);
  r.no_coupling = !(r.slope > 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double res = points[i].rate - r.background - r.slope * points[i].s;
    r.chi2 += w[i] * res * res;
  }
  r.dof = static_cast<int>(points.size()) - 2;
  return r;
}

FitResult fit_dc(const HeatingDataset& d) {
  if (d.regime != Regime::kDc) throw ValidationError("fit_dc needs a dc dataset");
  d.validate();
  FitResult r = fit_line(d.points);
  r.regime = Regime::kDc;
  // k = c / D^2.
  const double c = dc_coupling(d.context.species, d.context.omega, 1.0);
  if (r.no_coupling) {
    r.derived = std::numeric_limits<double>::infinity();
    r.derived_sigma = std::numeric_limits<double>::infinity();
  } else {
    r.derived = std::sqrt(c / r.slope);
    r.derived_sigma = r.derived * r.slope_sigma / (2.0 * r.slope);
  }
  return r;
}

FitResult fit_rf(const HeatingDataset& d) {
  if (d.regime != Regime::kRf) throw ValidationError("fit_rf needs an rf dataset");
  d.validate();
  FitResult r = fit_line(d.points);
  r.regime = Regime::kRf;
  // k = c grad^2.
  const double c = rf_coupling(d.context.species, d.context.omega, d.context.rf_omega,
                               d.context.rf_amplitude, 1.0);
  if (r.slope > 0.0) {
    r.derived = std::sqrt(r.slope / c);
    r.derived_sigma = r.derived * r.slope_sigma / (2.0 * r.slope);
  } else {
    // Gradient pinned at zero; sigma is the gradient whose slope equals one slope sigma.
    r.derived = 0.0;
    r.derived_sigma = std::sqrt(r.slope_sigma / c);
  }
  return r;
}

FitResult fit_dataset(const HeatingDataset& d) {
  return d.regime == Regime::kDc ? fit_dc(d) : fit_rf(d);
}

void write_dataset(std::ostream& out, const HeatingDataset& d) {
  out << kDatasetHeader << '\n';
  const auto old = out.precision(17);
  for (const auto& p : d.points) {
    out << p.s << ',' << p.s_sigma << ',' << p.rate << ',' << p.rate_sigma << ',' << to_string(d.regime) << '\n';
  }
  out.precision(old);
}

HeatingDataset read_dataset(std::istream& in, const FitContext& context) {
  HeatingDataset d;
  d.context = context;
  std::string line;
  bool header = false, have_regime = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    boost::algorithm::trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kDatasetHeader) throw ParseError(std::string("dataset: expected header '") + kDatasetHeader + "'");
      header = true;
      continue;
    }
    std::vector<std::string> cols;
    boost::algorithm::split(cols, line, boost::is_any_of(","));
    if (cols.size() != 5) throw ParseError("dataset line " + std::to_string(lineno) + ": expected 5 columns");
    for (auto& c : cols) boost::algorithm::trim(c);
    HeatingPoint p{parse_field(cols[0], lineno), parse_field(cols[1], lineno), parse_field(cols[2], lineno),
                   parse_field(cols[3], lineno)};
    const Regime r = parse_regime(cols[4]);
    if (have_regime && r != d.regime) throw ParseError("dataset line " + std::to_string(lineno) + ": mixed regimes");
    d.regime = r;
    have_regime = true;
    d.points.push_back(p);
  }
  if (!header) throw ParseError("dataset: missing header");
  return d;
}

HeatingDataset load_dataset(const std::filesystem::path& path, const FitContext& context) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset file '" + path.string() + "'");
  return read_dataset(in, context);
}

void save_dataset(const std::filesystem::path& path, const HeatingDataset& d) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write dataset file '" + path.string() + "'");
  write_dataset(out, d);
}

}  // namespace ionheat
