#pragma once

#include <cstdint>

#include "cartomdp/model.hpp"

namespace cartomdp {

// Charging-schedule scenario: time-indexed states carry the last step's
// flexible choice and total load. Weight 1 is the flexible load delivered
// per step (so the truncated sum is the total charge); weight 2 is a
// quadratic-in-load ageing surrogate. Over-capacity branches fall into an
// absorbing trap, so a schedule that risks the cap can never surely reach
// the goal.
struct EvScenarioParams {
  int horizon = 4;        // time steps
  int levels = 3;         // flexible levels 0..levels-1
  long capacity = 4;      // load cap per step
  long charge_target = 3; // required total flexible load
  int nonflex_values = 2; // support of the per-step background load
  std::uint64_t seed = 7;
};

struct EvScenario {
  WeightedMdp mdp;
  Rat nu1;       // the charge target
  Rat nu2_hint;  // an achievable-looking ageing bound
};

EvScenario generate_ev_scenario(const EvScenarioParams& params);

}  // namespace cartomdp
