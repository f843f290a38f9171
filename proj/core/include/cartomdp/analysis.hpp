#pragma once

#include <optional>
#include <vector>

#include "cartomdp/model.hpp"

namespace cartomdp {

struct NoAttractorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reachability classification of every state.
//  - almost_sure: some strategy reaches the goal with probability 1;
//  - sure: some strategy reaches the goal on every outcome, within
//    sure_rank steps (rank 0 is the goal itself).
// The witnesses are memoryless.
struct ReachSets {
  std::vector<bool> almost_sure;
  std::vector<bool> sure;
  std::vector<int> sure_rank;
  MemorylessStrategy prob1_witness;
  MemorylessStrategy sure_witness;
};

ReachSets compute_reach_sets(const WeightedMdp& mdp);

// Exact Gaussian elimination for A x = b; throws on singular systems.
std::vector<Rat> solve_linear_system(std::vector<std::vector<Rat>> a,
                                     std::vector<Rat> b);

std::vector<StateId> almost_sure_states(const WeightedMdp& mdp);

// Sub-MDP of the surely-winning states, keeping only edges whose support
// stays inside. Every strategy all of whose outcomes reach the goal lives
// in this restriction, so solution synthesis happens here.
struct SafeRestriction {
  WeightedMdp mdp;
  std::vector<StateId> to_original;
  std::vector<StateId> from_original;  // -1 when dropped
  bool initial_in_win = false;
};

SafeRestriction restrict_to_sure_win(const WeightedMdp& mdp);

// Memoryless strategy reaching the goal almost surely from every
// almost-sure state (surely, on the surely-winning ones), together with a
// positive upper bound on the expected accumulated weight i to absorption
// from any almost-sure state.
struct AttractorResult {
  MemorylessStrategy strategy;
  Rat bound;                         // >= expected cost from every state
  std::map<StateId, Rat> expected;   // exact per-state expectations
};

AttractorResult attractor_strategy(const WeightedMdp& mdp, int i = 1);

// Markov-chain facts under a fixed memoryless strategy: per-state expected
// accumulated weight i until the goal, +infinity where absorption is not
// almost sure. Computed by an exact linear solve on the absorbing chain.
std::map<StateId, ExtValue> expected_cost_to_goal(const WeightedMdp& mdp,
                                                  const MemorylessStrategy& s,
                                                  int i);

// Probability of ever reaching the goal, per state, under a memoryless
// strategy (exact absorption probabilities).
std::map<StateId, Rat> reach_probability(const WeightedMdp& mdp,
                                         const MemorylessStrategy& s);

// Maximal end components of the sub-MDP spanned by `allowed` states
// (every state when empty), using only edges whose support stays inside
// the component candidate.
struct Mec {
  std::vector<StateId> states;
  std::vector<const Edge*> edges;
};

std::vector<Mec> mec_decomposition(const WeightedMdp& mdp,
                                   const std::vector<bool>& allowed = {});

// Minimal expected mean weight i achievable inside the component by a
// stationary strategy (minimum over its recurrent classes). Enumerates
// pure policies; throws ResourceError beyond `policy_cap`. When every
// weight in the component is nonnegative the scan is skipped and 0 is
// returned (callers branch on the sign).
Rat mec_min_gain(const WeightedMdp& mdp, int i, const Mec& mec,
                 long policy_cap = 200000);

// Same scan, also reporting a pure policy whose recurrent class attains
// the returned gain (undefined choice map when the shortcut fired).
struct MecGainResult {
  Rat gain = 0;
  MemorylessStrategy policy;
};
MecGainResult mec_min_gain_full(const WeightedMdp& mdp, int i, const Mec& mec,
                                long policy_cap = 200000);

// Stochastic-shortest-path classification of every state for weight i:
// +infinity outside the almost-sure set; -infinity where a reachable end
// component allows pumping a negative mean while keeping the goal
// almost-surely reachable; a finite value otherwise, attained by the
// returned memoryless policy. Finite values come from exact policy
// iteration certified by a final Bellman check.
struct SspResult {
  std::vector<ExtValue> values;
  MemorylessStrategy policy;  // defined on finite-valued states
};

SspResult ssp_all(const WeightedMdp& mdp, int i);
ExtValue ssp_classify(const WeightedMdp& mdp, int i, StateId from);

// Total continuation policy built from a shortest-path result: the optimal
// policy on finite-valued states, a pumping route on minus-infinity states
// (drive to a negative-mean component and cycle it). The MDP must already
// be restricted so that every state reaches the goal almost surely.
MemorylessStrategy extension_policy(const WeightedMdp& mdp,
                                    const SspResult& ssp, int weight_index);

// Cycle-sign summary for weight i over the support graph of the non-goal
// states (the goal self-loop is never part of a cycle here).
struct CycleReport {
  int weight_index = 0;
  bool has_cycle = false;
  bool all_positive = false;
  bool all_nonnegative = false;
  bool all_nonpositive = false;
  std::optional<Rat> min_cycle_weight;  // set when all_positive
  std::optional<Rat> min_cycle_mean;
};

CycleReport cycle_report(const WeightedMdp& mdp, int i);

// Constant kappa of the counting bound under positive weight-1 cycles
// (weight index 1): (nu2 - W2*n)/c2 clamped at zero, with W2 the minimal
// edge weight, c2 the minimal cycle weight, n the non-goal state count.
Rat compute_kappa(const WeightedMdp& mdp, const Rat& nu2);

// Horizon from which every goal-free path from the initial state has
// accumulated weight 0 at least nu1 (requires positive weight-0 cycles).
// `formula` is the closed-form sound bound; `certified` is the least
// horizon whose min-plus envelopes stay above nu1 up to the formula bound.
struct N0Result {
  long certified = 0;
  long formula = 0;
};

N0Result compute_n0(const WeightedMdp& mdp, const Rat& nu1);

}  // namespace cartomdp
