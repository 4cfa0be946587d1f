#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ionheat/constants.hpp"
#include "ionheat/errors.hpp"
#include "ionheat/noise.hpp"

using namespace ionheat;
using constants::kTwoPi;

namespace {

const ResonatorParams kHelical{170.0, 500e-9, kTwoPi * 64.5e6};

NoiseSpectrum sample_spectrum() {
  return NoiseSpectrum(SpectrumKind::kVoltage, {1e2, 1e3, 1e5, 1e6, 1e8}, {1e-16, 4e-17, 2e-18, 1e-18, 3e-19});
}

}  // namespace

TEST(Noise, FlatGainZeroIsIdentity) {
  const auto s = sample_spectrum();
  const auto out = apply_chain(TransferChain({FlatGain{0.0}}), s);
  EXPECT_EQ(out, s);
}

TEST(Noise, RcLowpassAtSecularFrequency) {
  const double c = 1.0 / (kTwoPi * 1e3 * 2.5e3);
  const double r = stage_response(RcLowpass{1e3, c}, 1.29e6);
  EXPECT_NEAR(r, 1.0 / (1.0 + std::pow(1.29e6 / 2.5e3, 2)), 1e-12);
  EXPECT_NEAR(r, 3.75e-6, 0.01e-6);
  EXPECT_DOUBLE_EQ(stage_response(FirstOrderResponse{2.5e3}, 1.29e6), r);
}

TEST(Noise, BandpassRejectsSidebandsByTwentyDb) {
  const double f_rf = 64.5e6, f_sec = 1.29e6;
  const Bandpass bp{f_rf, f_sec, 20.0};
  EXPECT_NEAR(stage_response(bp, f_rf + f_sec), 0.01, 1e-15);
  EXPECT_NEAR(stage_response(bp, f_rf - f_sec), 0.01, 1e-15);
  EXPECT_DOUBLE_EQ(stage_response(bp, f_rf), 1.0);
  EXPECT_NEAR(stage_response(bp, f_rf + 10 * f_sec), 0.01, 1e-15);
}

TEST(Noise, ResonatorOnResonanceIsQLOmega) {
  EXPECT_NEAR(resonator_transfer(kHelical, 0.0), 3.44e4, 0.01e4);
  EXPECT_DOUBLE_EQ(resonator_transfer(kHelical, 0.0), kHelical.q * kHelical.inductance * kHelical.omega);
}

TEST(Noise, ResonatorSidebandNoise) {
  const double s = resonator_voltage_noise(kHelical, 8e-15, kTwoPi * 1.29e6, true);
  EXPECT_NEAR(s, 1.17e-11, 0.02 * 1.17e-11);
  EXPECT_DOUBLE_EQ(resonator_voltage_noise(kHelical, 8e-15, kTwoPi * 1.29e6, false), 0.5 * s);
}

TEST(Noise, ResonatorLowQLimit) {
  ResonatorParams p = kHelical;
  p.q = 1e-6;
  const double w = kTwoPi * 1.29e6;
  EXPECT_NEAR(resonator_transfer(p, w) / (p.q * p.inductance * p.omega), 1.0, 1e-12);
}

TEST(Noise, ResonatorEvenAndMonotone) {
  double previous = resonator_transfer(kHelical, 0.0);
  for (double w = 1e3; w < 1e9; w *= 1.7) {
    const double t = resonator_transfer(kHelical, w);
    EXPECT_DOUBLE_EQ(t, resonator_transfer(kHelical, -w));
    EXPECT_LT(t, previous);
    previous = t;
  }
}

TEST(Noise, JohnsonNoise) {
  EXPECT_NEAR(johnson_noise(1.0, 300.0), 1.66e-20, 0.01e-20);
  EXPECT_EQ(johnson_noise(0.0, 300.0), 0.0);
  EXPECT_EQ(johnson_noise(1.0, 0.0), 0.0);
  EXPECT_THROW(johnson_noise(-1.0, 300.0), ValidationError);
}

TEST(Noise, ChainIsAssociative) {
  const TransferStage a = RcLowpass{50.0, 1e-9};
  const TransferStage b = Bandpass{1e6, 2e5, 20.0};
  const TransferStage c = FlatGain{-3.0};
  const TransferChain left = TransferChain({a}).then(TransferChain({b})).then(TransferChain({c}));
  const TransferChain right = TransferChain({a}).then(TransferChain({b}).then(TransferChain({c})));
  const auto s = sample_spectrum();
  const auto composed = apply_chain(left, s);
  const auto stepwise = apply_chain(TransferChain({c}), apply_chain(TransferChain({b}), apply_chain(TransferChain({a}), s)));
  const auto other = apply_chain(right, s);
  for (std::size_t i = 0; i < s.psd().size(); ++i) {
    EXPECT_NEAR(composed.psd()[i], stepwise.psd()[i], 1e-12 * stepwise.psd()[i]);
    EXPECT_NEAR(composed.psd()[i], other.psd()[i], 1e-12 * other.psd()[i]);
  }
}

TEST(Noise, ChainOutputNonNegative) {
  const TransferChain chain({RcLowpass{50.0, 1e-9}, Bandpass{1e6, 2e5, 40.0}, FlatGain{-80.0}});
  const auto out = apply_chain(chain, sample_spectrum());
  for (double v : out.psd()) EXPECT_GE(v, 0.0);
}

TEST(Noise, ResonatorConvertsPowerToVoltage) {
  const TransferChain chain({Resonator{kHelical, 0.0}});
  EXPECT_EQ(chain.output_kind(SpectrumKind::kPower), SpectrumKind::kVoltage);
  const auto power = NoiseSpectrum::flat(SpectrumKind::kPower, 60e6, 70e6, 8e-15);
  const auto out = apply_chain(chain, power);
  EXPECT_EQ(out.kind(), SpectrumKind::kVoltage);
  EXPECT_THROW(apply_chain(chain, out), ValidationError);
}

TEST(Noise, InterpolationReproducesSamples) {
  const auto s = sample_spectrum();
  for (std::size_t i = 0; i < s.psd().size(); ++i) {
    EXPECT_DOUBLE_EQ(s.at(s.frequencies()[i]), s.psd()[i]);
  }
  const double mid = std::sqrt(1e2 * 1e3);
  EXPECT_NEAR(s.at(mid), std::sqrt(1e-16 * 4e-17), 1e-28);
  EXPECT_THROW(s.at(1.0), ValidationError);
  EXPECT_THROW(s.at(1e9), ValidationError);
}

TEST(Noise, SpectrumValidation) {
  EXPECT_THROW(NoiseSpectrum(SpectrumKind::kVoltage, {1.0, 1.0}, {1.0, 1.0}), ValidationError);
  EXPECT_THROW(NoiseSpectrum(SpectrumKind::kVoltage, {1.0, 2.0}, {1.0, -1.0}), ValidationError);
  EXPECT_THROW(NoiseSpectrum(SpectrumKind::kVoltage, {1.0}, {1.0, 2.0}), ValidationError);
}

TEST(Noise, StageParsingRoundTrip) {
  const auto stage = parse_stage("resonator Q=170 L=5e-7 omega=4.0527e8 calibration_db=-1.5");
  const auto& r = std::get<Resonator>(stage);
  EXPECT_EQ(r.params.q, 170.0);
  EXPECT_EQ(r.calibration_db, -1.5);
  EXPECT_EQ(std::get<RcLowpass>(parse_stage("rc_lowpass R=1e3 C=6.4e-8")).capacitance, 6.4e-8);
  EXPECT_THROW(parse_stage("bandpass center_hz=1e6"), ParseError);
  EXPECT_THROW(parse_stage("teleporter gain=3"), ParseError);
  EXPECT_THROW(parse_stage("flat_gain gain_db=abc"), ParseError);
}

TEST(Noise, SpectrumCsvRoundTrip) {
  const auto s = sample_spectrum();
  std::stringstream io;
  write_spectrum(io, s);
  EXPECT_EQ(read_spectrum(io), s);
}
