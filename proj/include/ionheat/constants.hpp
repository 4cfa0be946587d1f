#pragma once

// CODATA 2018 exact / recommended values, SI units.
namespace ionheat::constants {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline constexpr double kBoltzmann = 1.380649e-23;          // J/K
inline constexpr double kHbar = 1.054571817e-34;            // J s
inline constexpr double kElementaryCharge = 1.602176634e-19; // C
inline constexpr double kAtomicMassUnit = 1.66053906660e-27; // kg
inline constexpr double kElectronMassU = 5.48579909065e-4;  // u

// 88Sr atomic mass minus one electron.
inline constexpr double kSr88IonMass = (87.9056122571 - kElectronMassU) * kAtomicMassUnit;

}  // namespace ionheat::constants
