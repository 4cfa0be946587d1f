#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ionheat {

enum class ElectrodeRole { kDc, kRf };

// Axis-aligned rectangle in the z = 0 plane, metres.
struct Rect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double length() const { return y_max - y_min; }
  bool operator==(const Rect&) const = default;
};

struct Electrode {
  std::string id;
  Rect extent;
  std::string group;
  ElectrodeRole role = ElectrodeRole::kDc;

  bool operator==(const Electrode&) const = default;
};

// Planar electrode layout. Construction validates:
//  - every rectangle is non-degenerate,
//  - no two rectangles overlap with positive area,
//  - electrode ids are unique,
//  - exactly one group carries the RF role and no group mixes roles.
class ElectrodeLayout {
 public:
  ElectrodeLayout(std::vector<Electrode> electrodes, double ion_height_hint,
                  std::string description = {});

  const std::vector<Electrode>& electrodes() const { return electrodes_; }
  double ion_height_hint() const { return ion_height_hint_; }
  const std::string& description() const { return description_; }
  const std::string& rf_group() const { return rf_group_; }

  bool has_group(std::string_view group) const;
  // Groups in order of first appearance.
  std::vector<std::string> groups() const;
  std::vector<std::string> dc_groups() const;
  std::vector<Rect> group_rects(std::string_view group) const;

  bool operator==(const ElectrodeLayout&) const = default;

 private:
  std::vector<Electrode> electrodes_;
  double ion_height_hint_;
  std::string description_;
  std::string rf_group_;
};

inline constexpr std::string_view kLayoutHeader = "# ionheat-layout v1";

ElectrodeLayout parse_layout(std::istream& in);
ElectrodeLayout load_layout(const std::filesystem::path& path);
void write_layout(std::ostream& out, const ElectrodeLayout& layout);
void save_layout(const std::filesystem::path& path, const ElectrodeLayout& layout);

std::string_view to_string(ElectrodeRole role);

}  // namespace ionheat
