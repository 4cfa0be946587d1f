#include "ionheat/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ionheat/errors.hpp"

namespace ionheat {

namespace pt = boost::property_tree;

namespace {

bool overlaps(const Rect& a, const Rect& b) {
  const double dx = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double dy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return dx > 0.0 && dy > 0.0;
}

ElectrodeRole parse_role(const std::string& s, const std::string& where) {
  if (s == "dc") return ElectrodeRole::kDc;
  if (s == "rf") return ElectrodeRole::kRf;
  throw ParseError(where + ": role must be 'dc' or 'rf', got '" + s + "'");
}

double get_number(const pt::ptree& node, const std::string& key, const std::string& where) {
  const auto value = node.get_optional<std::string>(key);
  if (!value) throw ParseError(where + ": missing key '" + key + "'");
  try {
    std::size_t used = 0;
    const double v = std::stod(*value, &used);
    if (used != value->size()) throw std::invalid_argument(*value);
    return v;
  } catch (const std::exception&) {
    throw ParseError(where + ": key '" + key + "' is not a number: '" + *value + "'");
  }
}

}  // namespace

std::string_view to_string(ElectrodeRole role) {
  return role == ElectrodeRole::kRf ? "rf" : "dc";
}

ElectrodeLayout::ElectrodeLayout(std::vector<Electrode> electrodes, double ion_height_hint,
                                 std::string description)
    : electrodes_(std::move(electrodes)),
      ion_height_hint_(ion_height_hint),
      description_(std::move(description)) {
  if (electrodes_.empty()) throw ValidationError("layout has no electrodes");
  if (!(ion_height_hint_ > 0.0)) throw ValidationError("ion_height_hint must be positive");

  std::set<std::string> ids;
  std::set<std::string> rf_groups;
  std::set<std::string> dc_groups;
  for (const auto& e : electrodes_) {
    if (e.id.empty()) throw ValidationError("electrode with empty id");
    if (!ids.insert(e.id).second) throw ValidationError("duplicate electrode id '" + e.id + "'");
    if (e.group.empty()) throw ValidationError("electrode '" + e.id + "' has no group");
    if (!(e.extent.x_min < e.extent.x_max) || !(e.extent.y_min < e.extent.y_max)) {
      throw ValidationError("electrode '" + e.id + "' has a degenerate rectangle");
    }
    (e.role == ElectrodeRole::kRf ? rf_groups : dc_groups).insert(e.group);
  }
  for (const auto& g : rf_groups) {
    if (dc_groups.count(g)) throw ValidationError("group '" + g + "' mixes rf and dc electrodes");
  }
  if (rf_groups.size() != 1) {
    throw ValidationError("layout must have exactly one rf group, found " +
                          std::to_string(rf_groups.size()));
  }
  rf_group_ = *rf_groups.begin();

  for (std::size_t i = 0; i < electrodes_.size(); ++i) {
    for (std::size_t j = i + 1; j < electrodes_.size(); ++j) {
      if (overlaps(electrodes_[i].extent, electrodes_[j].extent)) {
        throw ValidationError("electrodes '" + electrodes_[i].id + "' and '" + electrodes_[j].id +
                              "' overlap");
      }
    }
  }
}

bool ElectrodeLayout::has_group(std::string_view group) const {
  return std::any_of(electrodes_.begin(), electrodes_.end(),
                     [&](const Electrode& e) { return e.group == group; });
}

std::vector<std::string> ElectrodeLayout::groups() const {
  std::vector<std::string> out;
  for (const auto& e : electrodes_) {
    if (std::find(out.begin(), out.end(), e.group) == out.end()) out.push_back(e.group);
  }
  return out;
}

std::vector<std::string> ElectrodeLayout::dc_groups() const {
  auto all = groups();
  std::erase(all, rf_group_);
  return all;
}

std::vector<Rect> ElectrodeLayout::group_rects(std::string_view group) const {
  std::vector<Rect> out;
  for (const auto& e : electrodes_) {
    if (e.group == group) out.push_back(e.extent);
  }
  return out;
}

ElectrodeLayout parse_layout(std::istream& in) {
  std::string first;
  std::getline(in, first);
  while (!first.empty() && (first.back() == '\r' || first.back() == ' ')) first.pop_back();
  if (first != kLayoutHeader) {
    throw ParseError("layout: first line must be '" + std::string(kLayoutHeader) + "'");
  }

  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    // Line numbers reported by the parser exclude the header line.
    throw ParseError("layout: " + e.message() + " (line " + std::to_string(e.line() + 1) + ")");
  }

  double height = 0.0;
  std::string description;
  std::vector<Electrode> electrodes;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      if (key == "ion_height_hint") {
        height = get_number(tree, key, "layout");
      } else if (key == "description") {
        description = node.data();
      } else {
        throw ParseError("layout: unknown top-level key '" + key + "'");
      }
      continue;
    }
    const std::string prefix = "electrode ";
    if (key.rfind(prefix, 0) != 0) {
      throw ParseError("layout: unknown section '[" + key + "]'");
    }
    const std::string where = "layout [" + key + "]";
    Electrode e;
    e.id = key.substr(prefix.size());
    for (const auto& [k, v] : node) {
      static const std::set<std::string> known{"role", "group", "x_min", "x_max", "y_min", "y_max"};
      if (!known.count(k)) throw ParseError(where + ": unknown key '" + k + "'");
    }
    e.role = parse_role(node.get<std::string>("role", ""), where);
    e.group = node.get<std::string>("group", "");
    if (e.group.empty()) throw ParseError(where + ": missing key 'group'");
    e.extent = {get_number(node, "x_min", where), get_number(node, "x_max", where),
                get_number(node, "y_min", where), get_number(node, "y_max", where)};
    electrodes.push_back(std::move(e));
  }
  if (height == 0.0) throw ParseError("layout: missing key 'ion_height_hint'");
  return ElectrodeLayout(std::move(electrodes), height, std::move(description));
}

ElectrodeLayout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open layout file '" + path.string() + "'");
  return parse_layout(in);
}

void write_layout(std::ostream& out, const ElectrodeLayout& layout) {
  out << kLayoutHeader << '\n';
  const auto old_precision = out.precision(17);
  if (!layout.description().empty()) out << "description = " << layout.description() << '\n';
  out << "ion_height_hint = " << layout.ion_height_hint() << '\n';
  for (const auto& e : layout.electrodes()) {
    out << "\n[electrode " << e.id << "]\n"
        << "role = " << to_string(e.role) << '\n'
        << "group = " << e.group << '\n'
        << "x_min = " << e.extent.x_min << '\n'
        << "x_max = " << e.extent.x_max << '\n'
        << "y_min = " << e.extent.y_min << '\n'
        << "y_max = " << e.extent.y_max << '\n';
  }
  out.precision(old_precision);
}

void save_layout(const std::filesystem::path& path, const ElectrodeLayout& layout) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write layout file '" + path.string() + "'");
  write_layout(out, layout);
}

}  // namespace ionheat
