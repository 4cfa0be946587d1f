#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "ionheat/fields.hpp"
#include "ionheat/fit.hpp"
#include "ionheat/geometry.hpp"
#include "ionheat/noise.hpp"
#include "ionheat/species.hpp"
#include "ionheat/trap.hpp"

namespace ionheat {

// Sectioned key = value run configuration in SI units. Keys are addressed as
// "section.key". Relative paths resolve against the directory of the file.
class RunConfig {
 public:
  RunConfig() = default;
  static RunConfig parse(std::istream& in, std::filesystem::path base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  // Override or add a key from "section.key=value".
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Whitespace- or comma-separated numbers.
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<std::string> get_words(const std::string& key) const;
  Vec3 get_vec3(const std::string& key) const;
  std::filesystem::path get_path(const std::string& key) const;
  // Keys of a section in file order.
  std::vector<std::string> keys(const std::string& section) const;

  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  boost::property_tree::ptree tree_;
  std::filesystem::path base_dir_;
};

ElectrodeLayout layout_from(const RunConfig& cfg);
IonSpecies species_from(const RunConfig& cfg);
TrapConfig trap_config_from(const RunConfig& cfg, const ElectrodeLayout& layout);
// [chain] stage1, stage2, ... in numeric order.
TransferChain chain_from(const RunConfig& cfg);
// Context for fits; the secular frequency is [fit] secular_frequency_hz.
FitContext fit_context_from(const RunConfig& cfg);

// --out-dir value, else IONHEAT_OUT_DIR, else the working directory.
std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag);

}  // namespace ionheat
