#pragma once

#include <limits>
#include <unordered_map>

#include "cartomdp/optimize.hpp"

namespace cartomdp {

enum class CounterMode { NonNegativeCycles, NonPositiveCycles };

// Single-weight MDP tracking the weight-1 accumulation in the state. All
// goal configurations whose counter clears the threshold are merged into
// one absorbing goal; under-threshold goal configurations become absorbing
// dead states. Weights are scaled to integers by the common denominator.
struct ProductMdp {
  WeightedMdp mdp;  // k = 1, weight = original weight 2

  CounterMode mode = CounterMode::NonNegativeCycles;
  long scale = 1;        // weight-1 denominators cleared by this factor
  long big_w = 0;        // max |scaled weight-1| on edges
  long m_bound = 0;      // big_w * (|S| + 1)
  long counter_lo = 0, counter_hi = 0;  // finite counter range
  long nu1_scaled = 0;

  static constexpr long kSaturated = std::numeric_limits<long>::max();
  static constexpr long kBottom = std::numeric_limits<long>::min();

  std::vector<StateId> orig_state;  // per product state
  std::vector<long> counter;       // per product state (sentinels above)

  StateId product_state(StateId orig, long counter) const;

 private:
  friend ProductMdp build_product(const WeightedMdp&, const Rat&, CounterMode,
                                  long);
  std::unordered_map<long long, StateId> index_;
};

// Builds the reachable fragment from (initial, 0). Requires the cycle
// certificate of the chosen mode; throws AssumptionError otherwise and
// ResourceError past the state budget.
ProductMdp build_product(const WeightedMdp& mdp, const Rat& nu1,
                         CounterMode mode, long state_budget = 1000000);

// Witness of a positive decision: everything lives on the surely-winning
// restriction of the product; the strategy plays the shortest-path (or
// pumping) policy to the switch step, then the product attractor.
struct P0Witness {
  ProductMdp product;
  SafeRestriction safe;         // of product.mdp
  AssembleResult assembled;     // strategy over safe.mdp
};

struct P0Result {
  bool yes = false;
  bool sure_win = false;     // initial product state is surely winning
  ExtValue pi = ExtValue::plus_infinity();  // shortest-path value there
  long product_states = 0;
  CounterMode mode = CounterMode::NonNegativeCycles;
  std::optional<P0Witness> witness;
};

// Decides whether some strategy reaches the goal on every outcome with
// weight-1 truncated sum at least nu1 everywhere and expected weight-2
// truncated sum strictly below nu2. Pseudo-polynomial via the counter
// product; requires single-signed weight-1 cycles.
P0Result decide_p0(const WeightedMdp& mdp, const Rat& nu1, const Rat& nu2);

struct VerifyReport {
  bool ok = false;
  std::string reason;  // "reachability", "threshold", "expectation" or ""
  std::optional<Rat> min_ts_w1;
  ExtValue expectation = ExtValue::plus_infinity();
};

// Exact check of a finite-memory strategy on the original MDP: exhausts
// the outcome tree (finiteness certified by the absorption bound), takes
// the minimum weight-1 truncated sum over outcomes, and evaluates the
// weight-2 expectation exactly.
VerifyReport verify_p0_witness(const WeightedMdp& mdp,
                               const CompositeStrategy& strategy,
                               const Rat& nu1, const Rat& nu2,
                               long step_bound = 100000);

// The same check for a decided witness, run on the product (where the
// correspondence makes the threshold condition structural).
VerifyReport verify_p0_witness(const WeightedMdp& mdp, const P0Witness& w,
                               const Rat& nu1, const Rat& nu2);

// Minimum truncated sum of weight i over all outcomes of the strategy;
// empty when some outcome survives past the step bound.
std::optional<Rat> min_ts_over_outcomes(const WeightedMdp& mdp,
                                        const CompositeStrategy& strategy,
                                        int weight_index, long step_bound);

// Image of the product witness on the original MDP: replays the counter
// over the history and follows the product tables.
struct CounterStrategy final : Strategy {
  // Self-contained copies.
  CounterMode mode = CounterMode::NonNegativeCycles;
  long scale = 1;
  long sat_above = 0;  // counters strictly above saturate (nonneg mode)
  long sat_below = 0;  // counters strictly below saturate (nonpos mode)
  long switch_step = 0;
  // (orig state, counter with sentinels) -> edge choice
  std::map<std::pair<StateId, long>, EdgeChoice> mid, tail;

  EdgeChoice act(const WeightedMdp& mdp,
                 std::span<const StateId> history) const override;
};

CounterStrategy counter_strategy_on_original(const WeightedMdp& mdp,
                                             const P0Witness& witness);

std::string serialize_counter_strategy(const WeightedMdp& mdp,
                                       const CounterStrategy& strategy);

}  // namespace cartomdp
