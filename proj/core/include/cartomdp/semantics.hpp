#pragma once

#include <cstdint>
#include <random>

#include "cartomdp/model.hpp"

namespace cartomdp {

// Horizon-measurable events: decided by the first `horizon` steps.
struct EventSpec {
  enum class Kind { PhiPlusN, PhiMinusN, PsiN, PhiMinusOrPsiN, ReachWithin };
  Kind kind = Kind::ReachWithin;
  int horizon = 0;
  Rat nu1 = 0;  // threshold for the PhiPlus/PhiMinus split
};

// Exact probability of a horizon-measurable event by enumerating the
// outcome tree up to the horizon (goal states absorb). Throws
// ResourceError past `node_budget` expansions.
Rat probability(const WeightedMdp& mdp, const Strategy& strategy,
                const EventSpec& event, long node_budget = 200000);

// Step-by-step exact pushforward of a composite strategy: keeps, per step,
// the mass and accumulated-weight mass of live (goal-free) paths, split
// between trie-resident histories and memoryless continuations.
class PhaseStepper {
 public:
  PhaseStepper(const WeightedMdp& mdp, const CompositeStrategy& strategy,
               int weight_index);

  // Advances one step under the strategy (head choices while histories are
  // trie-resident and before the switch step, memoryless phases after).
  void step();

  long steps_done() const { return steps_; }
  Rat live_mass() const;          // Prob(no goal visit so far)
  Rat expected_acc() const;       // E(Acc up to the current step)
  Rat absorbed_acc() const { return absorbed_acc_; }
  // E(TS) if the remaining live mass finishes with the given per-state
  // expected continuation costs.
  Rat finish_with(const std::map<StateId, Rat>& tail_expected) const;
  // Live (mass, acc-mass) per state, trie-resident histories included.
  std::map<StateId, std::pair<Rat, Rat>> live_by_state() const;

 private:
  const WeightedMdp& mdp_;
  const CompositeStrategy& strat_;
  int weight_index_;
  long steps_ = 0;
  // trie node -> (mass, acc-mass) for histories still inside the head trie
  std::map<int, std::pair<Rat, Rat>> in_trie_;
  // state -> (mass, acc-mass) for histories that left the trie
  std::map<StateId, std::pair<Rat, Rat>> flat_;
  Rat absorbed_mass_ = 0;
  Rat absorbed_acc_ = 0;

  void apply_choice(StateId state, const EdgeChoice& choice, int trie_node,
                    const Rat& mass, const Rat& accmass,
                    std::map<int, std::pair<Rat, Rat>>& next_trie,
                    std::map<StateId, std::pair<Rat, Rat>>& next_flat);
};

// Exact E(TS) of the composite strategy: enumerate the head phase, evolve
// the memoryless middle phase to the switch step, close with the tail's
// absorption expectations. +infinity when some reachable tail state does
// not reach the goal almost surely.
ExtValue expectation_ts(const WeightedMdp& mdp,
                        const CompositeStrategy& strategy, int weight_index);

ExtValue expectation_ts(const WeightedMdp& mdp,
                        const MemorylessStrategy& strategy, int weight_index);

// Exact Prob(TS_{w_i} >= nu) (or < nu) under a memoryless strategy via the
// lazily built accumulation chain; paths that never reach the goal carry
// TS = +infinity. Throws ResourceError when the accumulation chain exceeds
// the budget.
Rat ts_threshold_probability(const WeightedMdp& mdp,
                             const MemorylessStrategy& strategy,
                             int weight_index, const Rat& nu, bool at_least,
                             long budget = 100000);

struct McResult {
  double estimate = 0;
  double half_width = 0;  // 99% confidence
  int capped = 0;         // runs that hit the step cap (scored "not seen")
};

// Seeded sampling estimate of an event probability.
McResult monte_carlo_event(const WeightedMdp& mdp, const Strategy& strategy,
                           const EventSpec& event, int samples,
                           std::uint64_t seed, int step_cap = 10000);

// Seeded sampling estimate of E(TS_{w_i}); capped runs are excluded from
// the mean and reported.
McResult monte_carlo_ts(const WeightedMdp& mdp, const Strategy& strategy,
                        int weight_index, int samples, std::uint64_t seed,
                        int step_cap = 10000);

// Seeded sampling estimate of Prob(TS_{w_i} >= nu); capped runs score as
// "not observed".
McResult monte_carlo_ts_threshold(const WeightedMdp& mdp,
                                  const Strategy& strategy, int weight_index,
                                  const Rat& nu, int samples,
                                  std::uint64_t seed, int step_cap = 10000);

}  // namespace cartomdp
