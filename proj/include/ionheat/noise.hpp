#pragma once

#include <filesystem>
#include <optional>
#include <string_view>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace ionheat {

// All spectra are single-sided and per Hz. Frequencies are in Hz; angular
// frequencies appear only in resonator parameters and are labelled rad/s.
enum class SpectrumKind { kVoltage, kPower };  // V^2/Hz or W/Hz

std::string_view to_string(SpectrumKind kind);
SpectrumKind parse_spectrum_kind(std::string_view s);

class NoiseSpectrum {
 public:
  NoiseSpectrum(SpectrumKind kind, std::vector<double> frequency_hz, std::vector<double> psd);
  static NoiseSpectrum flat(SpectrumKind kind, double f_lo_hz, double f_hi_hz, double level);

  SpectrumKind kind() const { return kind_; }
  const std::vector<double>& frequencies() const { return freq_; }
  const std::vector<double>& psd() const { return psd_; }

  // Log-log interpolation between samples; linear on segments touching a zero
  // sample or zero frequency. Throws ValidationError outside the sampled range.
  double at(double frequency_hz) const;

  bool operator==(const NoiseSpectrum&) const = default;

 private:
  SpectrumKind kind_;
  std::vector<double> freq_;
  std::vector<double> psd_;
};

struct RcLowpass {
  double resistance = 0.0;   // ohm
  double capacitance = 0.0;  // F
};
struct FirstOrderResponse {
  double cutoff_hz = 0.0;
};
// Passband centred at center_hz. Attenuation rises as rejection_db * (df / offset_hz)^2
// inside |df| < offset_hz and stays at rejection_db beyond.
struct Bandpass {
  double center_hz = 0.0;
  double offset_hz = 0.0;
  double rejection_db = 0.0;
};
struct FlatGain {
  double gain_db = 0.0;
};
struct ResonatorParams {
  double q = 0.0;          // quality factor
  double inductance = 0.0; // H
  double omega = 0.0;      // resonance, rad/s

  void validate() const;
};
// Converts a power PSD (W/Hz) into a voltage PSD (V^2/Hz) at the electrode.
struct Resonator {
  ResonatorParams params;
  double calibration_db = 0.0;
};

using TransferStage = std::variant<RcLowpass, FirstOrderResponse, Bandpass, FlatGain, Resonator>;

// Power response of one stage at frequency f (dimensionless, or ohm for the resonator).
double stage_response(const TransferStage& stage, double frequency_hz);
void validate_stage(const TransferStage& stage);
std::string describe_stage(const TransferStage& stage);
// "kind key=value ..." e.g. "rc_lowpass R=1e3 C=6.4e-8", "resonator Q=170 L=5e-7 omega=4.05e8".
TransferStage parse_stage(const std::string& text);

class TransferChain {
 public:
  TransferChain() = default;
  explicit TransferChain(std::vector<TransferStage> stages);
  const std::vector<TransferStage>& stages() const { return stages_; }
  TransferChain then(const TransferChain& next) const;
  double response(double frequency_hz) const;  // product of stage responses
  SpectrumKind output_kind(SpectrumKind input) const;

 private:
  std::vector<TransferStage> stages_;
};

// Pointwise product of the spectrum with the chain response. Throws
// ValidationError if a resonator stage meets a voltage spectrum.
NoiseSpectrum apply_chain(const TransferChain& chain, const NoiseSpectrum& spectrum);

// Lorentzian transfer Q L Omega / (1 + 4 Q^2 w^2 / Omega^2), w the offset from
// resonance in rad/s.
double resonator_transfer(const ResonatorParams& params, double offset_omega);
// Voltage PSD at Omega +- w from a power PSD S_P measured at Omega + w. With
// both_sidebands the equal lower sideband is added.
double resonator_voltage_noise(const ResonatorParams& params, double s_p, double offset_omega,
                               bool both_sidebands);

// 4 k_B T R, V^2/Hz.
double johnson_noise(double resistance, double temperature);

void write_spectrum(std::ostream& out, const NoiseSpectrum& s);
NoiseSpectrum read_spectrum(std::istream& in);
NoiseSpectrum load_spectrum(const std::filesystem::path& path);
void save_spectrum(const std::filesystem::path& path, const NoiseSpectrum& s);

}  // namespace ionheat
