#include "ionheat/species.hpp"

#include "ionheat/errors.hpp"

namespace ionheat {

void IonSpecies::validate() const {
  if (!(mass > 0.0)) throw ValidationError("ion mass must be positive");
  if (!(charge > 0.0)) throw ValidationError("ion charge must be positive");
}

}  // namespace ionheat
