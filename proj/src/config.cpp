#include "ionheat/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"

namespace ionheat {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Dots separate section and key; keys themselves never contain dots.
pt::ptree::path_type key_path(const std::string& key) {
  return pt::ptree::path_type(key, '.');
}

double to_double(const std::string& text, const std::string& key) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (trim(text.substr(used)).empty()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("config: key '" + key + "' is not a number: '" + text + "'");
}

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"run", {"seed", "threads"}},
      {"layout", {"path"}},
      {"species", {"mass_kg", "charge_c"}},
      {"trap", {"rf_frequency_hz", "rf_amplitude_v", "stray_field_v_per_m", "search_center_m", "search_half_width_m",
                "minimize_gradient"}},
      {"dc", {}},
      {"shims", {"groups"}},
      {"fields", {"points_m", "groups"}},
      {"chain", {"input_kind", "input_psd", "input_band_hz", "input_file", "evaluate_hz"}},
      {"budget", {"background", "background_sigma", "secular_frequency_hz", "dc_groups", "dc_distance_m",
                  "dc_psd_v2_per_hz", "dc_psd_sigma", "dc_psd_derived", "rf_psd_v2_per_hz", "rf_psd_sigma",
                  "gradient_v2_per_m3", "gradient_sigma", "monte_carlo"}},
      {"fit", {"regime", "data", "secular_frequency_hz", "residual_psd", "residual_sigma"}},
      {"synth", {"regime", "background", "parameter", "residual_psd", "injected_psd", "secular_frequency_hz", "n_shots",
                 "n_delays", "delays_s", "target_nbar", "psd_relative_sigma"}},
      {"oracle", {"mode", "secular_frequency_hz", "field_psd", "duration_periods", "n_realizations", "step_s",
                  "band_hz", "write_traces", "displacement_m", "sideband_psd", "both_sidebands",
                  "steps_per_rf_period", "drive_harmonic", "drive_amplitude_v", "drive_detunings"}},
  };
  return keys;
}

// [dc] keys are electrode group names, checked against the layout later.
void check_key(const std::string& section, const std::string& key) {
  const auto it = schema().find(section);
  if (it == schema().end()) throw ValidationError("config: unknown section '" + section + "'");
  if (section == "dc") return;
  if (section == "chain" && key.rfind("stage", 0) == 0) return;
  if (!it->second.contains(key)) throw ValidationError("config: unknown key '" + section + "." + key + "'");
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in, std::filesystem::path base_dir) {
  RunConfig cfg;
  cfg.base_dir_ = std::move(base_dir);
  try {
    pt::read_ini(in, cfg.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [name, node] : cfg.tree_) {
    if (node.empty()) throw ParseError("config: key '" + name + "' must be inside a [section]");
    for (const auto& [key, value] : node) check_key(name, key);
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path.string() + "'");
  return parse(in, path.parent_path());
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("override '" + assignment + "' must look like section.key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == key.size() || key.find('.', dot + 1) != std::string::npos) {
    throw ValidationError("override key '" + key + "' must look like section.key");
  }
  check_key(key.substr(0, dot), key.substr(dot + 1));
  tree_.put(key_path(key), value);
}

bool RunConfig::has(const std::string& key) const {
  return static_cast<bool>(tree_.get_optional<std::string>(key_path(key)));
}

std::string RunConfig::get_string(const std::string& key) const {
  const auto v = tree_.get_optional<std::string>(key_path(key));
  if (!v) throw ValidationError("config: missing key '" + key + "'");
  return trim(*v);
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

double RunConfig::get_double(const std::string& key) const { return to_double(get_string(key), key); }

double RunConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int RunConfig::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const std::string s = get_string(key);
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("config: key '" + key + "' is not an integer: '" + s + "'");
}

std::uint64_t RunConfig::get_seed(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string s = get_string(key);
  try {
    std::size_t used = 0;
    if (!s.empty() && s[0] != '-') {
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ValidationError("config: key '" + key + "' is not a non-negative integer: '" + s + "'");
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string s = get_string(key);
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ValidationError("config: key '" + key + "' must be true or false, got '" + s + "'");
}

std::vector<std::string> RunConfig::get_words(const std::string& key) const {
  std::string s = get_string(key);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& w : get_words(key)) out.push_back(to_double(w, key));
  return out;
}

Vec3 RunConfig::get_vec3(const std::string& key) const {
  const auto v = get_doubles(key);
  if (v.size() != 3) throw ValidationError("config: key '" + key + "' needs 3 numbers");
  return {v[0], v[1], v[2]};
}

std::filesystem::path RunConfig::get_path(const std::string& key) const {
  std::filesystem::path p = get_string(key);
  if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
  return p;
}

std::vector<std::string> RunConfig::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto node = tree_.get_child_optional(key_path(section));
  if (!node) return out;
  for (const auto& [k, v] : *node) out.push_back(k);
  return out;
}

ElectrodeLayout layout_from(const RunConfig& cfg) { return load_layout(cfg.get_path("layout.path")); }

IonSpecies species_from(const RunConfig& cfg) {
  IonSpecies s;
  s.mass = cfg.get_double("species.mass_kg", s.mass);
  s.charge = cfg.get_double("species.charge_c", s.charge);
  s.validate();
  return s;
}

TrapConfig trap_config_from(const RunConfig& cfg, const ElectrodeLayout& layout) {
  TrapConfig t;
  t.species = species_from(cfg);
  t.rf_omega = constants::kTwoPi * cfg.get_double("trap.rf_frequency_hz");
  t.rf_amplitude = cfg.get_double("trap.rf_amplitude_v");
  if (cfg.has("trap.stray_field_v_per_m")) t.stray_field = cfg.get_vec3("trap.stray_field_v_per_m");
  if (cfg.has("trap.search_center_m")) t.search_center = cfg.get_vec3("trap.search_center_m");
  t.search_half_width = cfg.get_double("trap.search_half_width_m", t.search_half_width);
  for (const auto& g : cfg.keys("dc")) {
    if (!layout.has_group(g)) throw ValidationError("config: key 'dc." + g + "' names a group missing from the layout");
    t.dc_voltages[g] = cfg.get_double("dc." + g);
  }
  t.validate(layout);
  return t;
}

TransferChain chain_from(const RunConfig& cfg) {
  std::vector<std::pair<int, std::string>> numbered;
  for (const auto& k : cfg.keys("chain")) {
    if (k.rfind("stage", 0) != 0) continue;
    const std::string digits = k.substr(5);
    if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
      throw ValidationError("config: chain stage key '" + k + "' must be stageN");
    }
    numbered.emplace_back(std::stoi(digits), k);
  }
  std::sort(numbered.begin(), numbered.end());
  std::vector<TransferStage> stages;
  for (const auto& [n, k] : numbered) {
    try {
      stages.push_back(parse_stage(cfg.get_string("chain." + k)));
    } catch (const ParseError& e) {
      throw ValidationError("config: key 'chain." + k + "': " + e.what());
    }
  }
  return TransferChain(std::move(stages));
}

FitContext fit_context_from(const RunConfig& cfg) {
  FitContext c;
  c.species = species_from(cfg);
  c.omega = constants::kTwoPi * cfg.get_double("fit.secular_frequency_hz");
  if (cfg.has("trap.rf_frequency_hz")) c.rf_omega = constants::kTwoPi * cfg.get_double("trap.rf_frequency_hz");
  c.rf_amplitude = cfg.get_double("trap.rf_amplitude_v", 0.0);
  return c;
}

std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("IONHEAT_OUT_DIR"); env && *env) return env;
  return std::filesystem::current_path();
}

}  // namespace ionheat
