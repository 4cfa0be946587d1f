#pragma once

#include "ionheat/constants.hpp"

namespace ionheat {

struct IonSpecies {
  double mass = constants::kSr88IonMass;          // kg
  double charge = constants::kElementaryCharge;   // C

  static IonSpecies sr88() { return {}; }
  void validate() const;
};

}  // namespace ionheat
