#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ionheat/errors.hpp"
#include "ionheat/geometry.hpp"
#include "test_support.hpp"

using namespace ionheat;
using namespace ionheat::testing;

namespace {

Electrode dc(const std::string& id, Rect r, const std::string& group = "A") {
  return {id, r, group, ElectrodeRole::kDc};
}
Electrode rf(const std::string& id, Rect r) { return {id, r, "RF", ElectrodeRole::kRf}; }

std::string bundled_path() { return std::string(IONHEAT_DATA_DIR) + "/surface_trap_approx.layout"; }

}  // namespace

TEST(Geometry, LoadsBundledLayout) {
  const auto layout = load_layout(bundled_path());
  EXPECT_EQ(layout.electrodes().size(), 13u);
  EXPECT_EQ(layout.rf_group(), "RF");
  EXPECT_DOUBLE_EQ(layout.ion_height_hint(), 50e-6);
  EXPECT_EQ(layout.group_rects("A").size(), 4u);
  for (const auto& r : layout.group_rects("A")) EXPECT_NEAR(r.length() + 5e-6, 120e-6, 1e-12);
  EXPECT_NE(layout.description().find("approximate"), std::string::npos);
}

TEST(Geometry, SingleSquareFile) {
  std::istringstream in(
      "# ionheat-layout v1\n"
      "ion_height_hint = 5e-5\n"
      "[electrode sq]\nrole = rf\ngroup = RF\n"
      "x_min = -5e-5\nx_max = 5e-5\ny_min = -5e-5\ny_max = 5e-5\n");
  const auto layout = parse_layout(in);
  ASSERT_EQ(layout.electrodes().size(), 1u);
  EXPECT_EQ(layout.electrodes()[0].id, "sq");
}

TEST(Geometry, OverlapRejectedOnLoad) {
  std::istringstream in(
      "# ionheat-layout v1\n"
      "ion_height_hint = 5e-5\n"
      "[electrode a]\nrole = rf\ngroup = RF\nx_min = 0\nx_max = 2\ny_min = 0\ny_max = 2\n"
      "[electrode b]\nrole = dc\ngroup = A\nx_min = 1\nx_max = 3\ny_min = 1\ny_max = 3\n");
  EXPECT_THROW(parse_layout(in), ValidationError);
}

TEST(Geometry, ParseErrors) {
  std::istringstream no_header("ion_height_hint = 1\n");
  EXPECT_THROW(parse_layout(no_header), ParseError);
  std::istringstream bad_number(
      "# ionheat-layout v1\nion_height_hint = 5e-5\n"
      "[electrode a]\nrole = rf\ngroup = RF\nx_min = zero\nx_max = 2\ny_min = 0\ny_max = 2\n");
  EXPECT_THROW(parse_layout(bad_number), ParseError);
  std::istringstream bad_role(
      "# ionheat-layout v1\nion_height_hint = 5e-5\n"
      "[electrode a]\nrole = ac\ngroup = RF\nx_min = 0\nx_max = 2\ny_min = 0\ny_max = 2\n");
  EXPECT_THROW(parse_layout(bad_role), ParseError);
  std::istringstream unknown_key(
      "# ionheat-layout v1\nion_height_hint = 5e-5\n"
      "[electrode a]\nrole = rf\ngroup = RF\nvoltage = 3\nx_min = 0\nx_max = 2\ny_min = 0\ny_max = 2\n");
  EXPECT_THROW(parse_layout(unknown_key), ParseError);
  EXPECT_THROW(load_layout("/nonexistent/file.layout"), ParseError);
}

TEST(Geometry, ValidationRules) {
  const Rect unit{0, 1, 0, 1};
  EXPECT_NO_THROW(ElectrodeLayout({rf("r", unit)}, 1.0));
  EXPECT_THROW(ElectrodeLayout({dc("a", unit)}, 1.0), ValidationError);  // no rf group
  EXPECT_THROW(ElectrodeLayout({rf("r", {0, 0, 0, 1})}, 1.0), ValidationError);
  EXPECT_THROW(ElectrodeLayout({rf("r", {0, 1, 2, 1})}, 1.0), ValidationError);
  EXPECT_THROW(ElectrodeLayout({rf("r", unit), rf("r", {2, 3, 0, 1})}, 1.0), ValidationError);
  EXPECT_THROW(ElectrodeLayout({rf("r", unit), dc("a", {2, 3, 0, 1}, "RF")}, 1.0), ValidationError);
  EXPECT_THROW(ElectrodeLayout({rf("r", unit)}, 0.0), ValidationError);
  Electrode second_rf{"s", {2, 3, 0, 1}, "RF2", ElectrodeRole::kRf};
  EXPECT_THROW(ElectrodeLayout({rf("r", unit), second_rf}, 1.0), ValidationError);
  // Touching edges are not an overlap.
  EXPECT_NO_THROW(ElectrodeLayout({rf("r", unit), dc("a", {1, 2, 0, 1})}, 1.0));
}

TEST(Geometry, RoundTripBundled) {
  const auto layout = load_layout(bundled_path());
  std::stringstream buf;
  write_layout(buf, layout);
  EXPECT_EQ(parse_layout(buf), layout);
}

TEST(Geometry, RoundTripRandomLayouts) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-6, 1e-3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Electrode> es;
    double x = -1e-3 * u(rng);
    const int n = 1 + trial % 6;
    for (int k = 0; k < n; ++k) {
      const double w = u(rng);
      const double y0 = -u(rng);
      Rect r{x, x + w, y0, y0 + u(rng)};
      x += w + u(rng);
      es.push_back(k == 0 ? rf("e" + std::to_string(k), r)
                          : dc("e" + std::to_string(k), r, "G" + std::to_string(k % 3)));
    }
    const ElectrodeLayout layout(es, u(rng), "random");
    std::stringstream buf;
    write_layout(buf, layout);
    EXPECT_EQ(parse_layout(buf), layout);
  }
}

TEST(Geometry, ValidationAcceptsExactlyValidRandomSets) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Electrode> es;
    for (int k = 0; k < 3; ++k) {
      const double x0 = std::floor(u(rng)), y0 = std::floor(u(rng));
      es.push_back(k == 0 ? rf("e0", {x0, x0 + 2, y0, y0 + 2})
                          : dc("e" + std::to_string(k), {x0, x0 + 2, y0, y0 + 2}));
    }
    bool any_overlap = false;
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        const auto& a = es[i].extent;
        const auto& b = es[j].extent;
        any_overlap |= std::min(a.x_max, b.x_max) > std::max(a.x_min, b.x_min) &&
                       std::min(a.y_max, b.y_max) > std::max(a.y_min, b.y_min);
      }
    }
    if (any_overlap) {
      EXPECT_THROW(ElectrodeLayout(es, 1.0), ValidationError);
    } else {
      EXPECT_NO_THROW(ElectrodeLayout(es, 1.0));
    }
  }
}

TEST(Geometry, ShortRailFileMatchesDerivedLayout) {
  const auto file = bundled_short_rail_layout();
  const auto derived = short_rail_layout();
  ASSERT_EQ(file.electrodes().size(), derived.electrodes().size());
  for (std::size_t i = 0; i < file.electrodes().size(); ++i) {
    EXPECT_EQ(file.electrodes()[i].id, derived.electrodes()[i].id);
    EXPECT_EQ(file.electrodes()[i].extent.y_min, derived.electrodes()[i].extent.y_min);
    EXPECT_EQ(file.electrodes()[i].extent.x_max, derived.electrodes()[i].extent.x_max);
  }
}
