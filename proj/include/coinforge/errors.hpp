#pragma once

#include <stdexcept>

namespace coinforge {

// A caller or an input stream broke a documented precondition: bounds left
// the unit interval, conditional means lost their ordering, a bit factory
// was fed a non-bit coin, and so on.
struct contract_violation : std::logic_error {
  using std::logic_error::logic_error;
};

// A sampler hit its iteration guard without reaching a decision. Better to
// refuse than to return a biased value.
struct did_not_converge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace coinforge
