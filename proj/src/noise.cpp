#include "ionheat/noise.hpp"

#include <boost/algorithm/string.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"

namespace ionheat {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double db_to_power(double db) { return std::pow(10.0, db / 10.0); }

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(what + ": not a number: '" + s + "'");
  }
}

}  // namespace

std::string_view to_string(SpectrumKind kind) {
  return kind == SpectrumKind::kVoltage ? "voltage" : "power";
}

SpectrumKind parse_spectrum_kind(std::string_view s) {
  if (s == "voltage") return SpectrumKind::kVoltage;
  if (s == "power") return SpectrumKind::kPower;
  throw ParseError("spectrum kind must be 'voltage' or 'power', got '" + std::string(s) + "'");
}

NoiseSpectrum::NoiseSpectrum(SpectrumKind kind, std::vector<double> frequency_hz,
                             std::vector<double> psd)
    : kind_(kind), freq_(std::move(frequency_hz)), psd_(std::move(psd)) {
  if (freq_.empty()) throw ValidationError("spectrum has no samples");
  if (freq_.size() != psd_.size()) throw ValidationError("spectrum frequency and psd lengths differ");
  for (std::size_t i = 0; i < freq_.size(); ++i) {
    if (!std::isfinite(freq_[i]) || freq_[i] < 0.0) throw ValidationError("spectrum frequency must be finite and >= 0");
    if (!std::isfinite(psd_[i]) || psd_[i] < 0.0) throw ValidationError("spectrum psd must be finite and >= 0");
    if (i > 0 && !(freq_[i] > freq_[i - 1])) throw ValidationError("spectrum frequencies must be strictly increasing");
  }
}

NoiseSpectrum NoiseSpectrum::flat(SpectrumKind kind, double f_lo_hz, double f_hi_hz, double level) {
  return NoiseSpectrum(kind, {f_lo_hz, f_hi_hz}, {level, level});
}

double NoiseSpectrum::at(double f) const {
  if (!(f >= freq_.front() && f <= freq_.back())) {
    std::ostringstream msg;
    msg << "frequency " << f << " Hz outside the spectrum range [" << freq_.front() << ", "
        << freq_.back() << "] Hz";
    throw ValidationError(msg.str());
  }
  auto it = std::lower_bound(freq_.begin(), freq_.end(), f);
  const std::size_t hi = static_cast<std::size_t>(it - freq_.begin());
  if (freq_[hi] == f) return psd_[hi];
  const std::size_t lo = hi - 1;
  const double f0 = freq_[lo], f1 = freq_[hi], p0 = psd_[lo], p1 = psd_[hi];
  if (p0 > 0.0 && p1 > 0.0 && f0 > 0.0) {
    const double t = std::log(f / f0) / std::log(f1 / f0);
    return std::exp(std::log(p0) + t * (std::log(p1) - std::log(p0)));
  }
  const double t = (f - f0) / (f1 - f0);
  return p0 + t * (p1 - p0);
}

void ResonatorParams::validate() const {
  if (!(q > 0.0)) throw ValidationError("resonator Q must be positive");
  if (!(inductance > 0.0)) throw ValidationError("resonator inductance must be positive");
  if (!(omega > 0.0)) throw ValidationError("resonator omega must be positive");
}

double resonator_transfer(const ResonatorParams& p, double offset_omega) {
  p.validate();
  const double x = offset_omega / p.omega;
  return p.q * p.inductance * p.omega / (1.0 + 4.0 * p.q * p.q * x * x);
}

double resonator_voltage_noise(const ResonatorParams& params, double s_p, double offset_omega,
                               bool both_sidebands) {
  if (!(offset_omega >= 0.0)) throw ValidationError("sideband offset must be >= 0");
  if (!(s_p >= 0.0)) throw ValidationError("power PSD must be >= 0");
  const double single = resonator_transfer(params, offset_omega) * s_p;
  return both_sidebands ? 2.0 * single : single;
}

double johnson_noise(double resistance, double temperature) {
  if (!(resistance >= 0.0)) throw ValidationError("resistance must be >= 0");
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  return 4.0 * constants::kBoltzmann * temperature * resistance;
}

void validate_stage(const TransferStage& stage) {
  std::visit(overloaded{
                 [](const RcLowpass& s) {
                   if (!(s.resistance > 0.0) || !(s.capacitance > 0.0)) {
                     throw ValidationError("rc_lowpass needs R > 0 and C > 0");
                   }
                 },
                 [](const FirstOrderResponse& s) {
                   if (!(s.cutoff_hz > 0.0)) throw ValidationError("first_order cutoff must be positive");
                 },
                 [](const Bandpass& s) {
                   if (!(s.center_hz > 0.0) || !(s.offset_hz > 0.0) || !(s.rejection_db >= 0.0)) {
                     throw ValidationError("bandpass needs center > 0, offset > 0, rejection >= 0 dB");
                   }
                 },
                 [](const FlatGain& s) {
                   if (!std::isfinite(s.gain_db)) throw ValidationError("flat_gain must be finite");
                 },
                 [](const Resonator& s) {
                   s.params.validate();
                   if (!std::isfinite(s.calibration_db)) throw ValidationError("resonator calibration must be finite");
                 },
             },
             stage);
}

double stage_response(const TransferStage& stage, double f) {
  return std::visit(
      overloaded{
          [f](const RcLowpass& s) {
            const double fc = 1.0 / (constants::kTwoPi * s.resistance * s.capacitance);
            return 1.0 / (1.0 + (f / fc) * (f / fc));
          },
          [f](const FirstOrderResponse& s) { return 1.0 / (1.0 + (f / s.cutoff_hz) * (f / s.cutoff_hz)); },
          [f](const Bandpass& s) {
            const double df = std::abs(f - s.center_hz);
            const double db = df < s.offset_hz ? s.rejection_db * (df / s.offset_hz) * (df / s.offset_hz)
                                               : s.rejection_db;
            return db_to_power(-db);
          },
          [](const FlatGain& s) { return db_to_power(s.gain_db); },
          [f](const Resonator& s) {
            const double offset = std::abs(constants::kTwoPi * f - s.params.omega);
            return resonator_transfer(s.params, offset) * db_to_power(s.calibration_db);
          },
      },
      stage);
}

std::string describe_stage(const TransferStage& stage) {
  std::ostringstream o;
  o << std::setprecision(12);
  std::visit(overloaded{
                 [&](const RcLowpass& s) { o << "rc_lowpass R=" << s.resistance << " C=" << s.capacitance; },
                 [&](const FirstOrderResponse& s) { o << "first_order cutoff_hz=" << s.cutoff_hz; },
                 [&](const Bandpass& s) {
                   o << "bandpass center_hz=" << s.center_hz << " offset_hz=" << s.offset_hz
                     << " rejection_db=" << s.rejection_db;
                 },
                 [&](const FlatGain& s) { o << "flat_gain gain_db=" << s.gain_db; },
                 [&](const Resonator& s) {
                   o << "resonator Q=" << s.params.q << " L=" << s.params.inductance
                     << " omega=" << s.params.omega << " calibration_db=" << s.calibration_db;
                 },
             },
             stage);
  return o.str();
}

TransferStage parse_stage(const std::string& text) {
  std::vector<std::string> tokens;
  const std::string trimmed = boost::algorithm::trim_copy(text);
  boost::algorithm::split(tokens, trimmed, boost::is_any_of(" \t"), boost::token_compress_on);
  if (tokens.empty() || tokens[0].empty()) throw ParseError("empty transfer stage");
  const std::string kind = tokens[0];
  std::map<std::string, double> kv;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos) throw ParseError("stage '" + kind + "': expected key=value, got '" + tokens[i] + "'");
    kv[tokens[i].substr(0, eq)] = parse_double(tokens[i].substr(eq + 1), "stage '" + kind + "' key '" + tokens[i].substr(0, eq) + "'");
  }
  auto take = [&](const std::string& key, std::optional<double> fallback = std::nullopt) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      if (fallback) return *fallback;
      throw ParseError("stage '" + kind + "': missing key '" + key + "'");
    }
    const double v = it->second;
    kv.erase(it);
    return v;
  };
  TransferStage stage;
  if (kind == "rc_lowpass") {
    stage = RcLowpass{take("R"), take("C")};
  } else if (kind == "first_order") {
    stage = FirstOrderResponse{take("cutoff_hz")};
  } else if (kind == "bandpass") {
    stage = Bandpass{take("center_hz"), take("offset_hz"), take("rejection_db")};
  } else if (kind == "flat_gain") {
    stage = FlatGain{take("gain_db")};
  } else if (kind == "resonator") {
    stage = Resonator{{take("Q"), take("L"), take("omega")}, take("calibration_db", 0.0)};
  } else {
    throw ParseError("unknown transfer stage kind '" + kind + "'");
  }
  if (!kv.empty()) throw ParseError("stage '" + kind + "': unknown key '" + kv.begin()->first + "'");
  validate_stage(stage);
  return stage;
}

TransferChain::TransferChain(std::vector<TransferStage> stages) : stages_(std::move(stages)) {
  for (const auto& s : stages_) validate_stage(s);
}

TransferChain TransferChain::then(const TransferChain& next) const {
  auto all = stages_;
  all.insert(all.end(), next.stages_.begin(), next.stages_.end());
  return TransferChain(std::move(all));
}

double TransferChain::response(double f) const {
  double r = 1.0;
  for (const auto& s : stages_) r *= stage_response(s, f);
  return r;
}

SpectrumKind TransferChain::output_kind(SpectrumKind kind) const {
  for (const auto& s : stages_) {
    if (std::holds_alternative<Resonator>(s)) {
      if (kind != SpectrumKind::kPower) {
        throw ValidationError("resonator stage requires a power spectrum input");
      }
      kind = SpectrumKind::kVoltage;
    }
  }
  return kind;
}

NoiseSpectrum apply_chain(const TransferChain& chain, const NoiseSpectrum& spectrum) {
  const SpectrumKind out_kind = chain.output_kind(spectrum.kind());
  std::vector<double> psd(spectrum.psd().size());
  for (std::size_t i = 0; i < psd.size(); ++i) {
    psd[i] = spectrum.psd()[i] * chain.response(spectrum.frequencies()[i]);
  }
  return NoiseSpectrum(out_kind, spectrum.frequencies(), std::move(psd));
}

void write_spectrum(std::ostream& out, const NoiseSpectrum& s) {
  out << "# kind=" << to_string(s.kind()) << '\n' << "frequency_hz,psd\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < s.psd().size(); ++i) out << s.frequencies()[i] << ',' << s.psd()[i] << '\n';
  out.precision(old);
}

NoiseSpectrum read_spectrum(std::istream& in) {
  std::string line;
  std::optional<SpectrumKind> kind;
  bool header = false;
  std::vector<double> f, p;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("kind=");
      if (pos != std::string::npos) kind = parse_spectrum_kind(boost::algorithm::trim_copy(line.substr(pos + 5)));
      continue;
    }
    if (!header) {
      if (line != "frequency_hz,psd") throw ParseError("spectrum: expected header 'frequency_hz,psd'");
      header = true;
      continue;
    }
    std::vector<std::string> cols;
    boost::algorithm::split(cols, line, boost::is_any_of(","));
    if (cols.size() != 2) throw ParseError("spectrum line " + std::to_string(lineno) + ": expected 2 columns");
    f.push_back(parse_double(boost::algorithm::trim_copy(cols[0]), "spectrum line " + std::to_string(lineno)));
    p.push_back(parse_double(boost::algorithm::trim_copy(cols[1]), "spectrum line " + std::to_string(lineno)));
  }
  if (!kind) throw ParseError("spectrum: missing '# kind=voltage|power' line");
  if (!header) throw ParseError("spectrum: missing header");
  return NoiseSpectrum(*kind, std::move(f), std::move(p));
}

NoiseSpectrum load_spectrum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open spectrum file '" + path.string() + "'");
  return read_spectrum(in);
}

void save_spectrum(const std::filesystem::path& path, const NoiseSpectrum& s) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write spectrum file '" + path.string() + "'");
  write_spectrum(out, s);
}

}  // namespace ionheat
