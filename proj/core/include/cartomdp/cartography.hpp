#pragma once

#include "cartomdp/optimize.hpp"

namespace cartomdp {

// Which cycle assumption applies, with its quantitative law.
struct CompletenessReport {
  enum class Kind { PositiveW2, PositiveW1, NoneApplicable };
  Kind kind = Kind::NoneApplicable;
  std::optional<Rat> kappa;     // PositiveW2: gap law kappa*n/(N-n)
  std::optional<N0Result> n0;   // PositiveW1: lower sequence stationary
};

CompletenessReport completeness_check(const WeightedMdp& mdp, const Rat& nu1,
                                      const Rat& nu2);

struct CartographyRecord {
  int horizon = 0;
  SolveResult lower;  // objective: below-threshold hits
  SolveResult upper;  // objective: below-threshold hits or goal misses
  std::optional<Rat> gap_bound;
  std::optional<long> stationary_at;  // certified stabilization horizon
};

struct CartographyOptions {
  int n_max = 6;
  Rat alpha = make_rat(1, 10000);  // requested tolerance (reported)
  int grid = 16;
  int restarts = 8;
  double grad_tol = 1e-9;
  std::uint64_t seed = 0;
  long node_budget = 200000;
  long point_cap = 2000000;
  int var_cap = 12;
  bool gradient_fallback = true;
};

struct CartographyResult {
  bool globally_infeasible = false;
  std::string infeasible_reason;

  SafeRestriction safe;            // all synthesis happens here
  std::vector<ExtValue> ssp_safe;  // per safe state, weight 2
  MemorylessStrategy extension;    // optimal continuation / pumping policy
  std::optional<AttractorResult> attractor;
  CompletenessReport completeness;
  std::vector<CartographyRecord> records;
  bool budget_exhausted = false;
  Rat requested_alpha = 0;

  // Largest certified lower bound of the lower sequence and smallest
  // witnessed value of the upper sequence: the residual bracket.
  std::optional<Rat> bracket_lo;
  std::optional<Rat> bracket_hi;
};

// Runs the two optimization-problem sequences on the terminal-weighted
// unfoldings of the surely-winning restriction, N = 1..n_max. Globally
// infeasible when the initial state cannot surely reach the goal or no
// strategy keeps the expected truncated sum below nu2.
CartographyResult run_cartography(const WeightedMdp& mdp, const Rat& nu1,
                                  const Rat& nu2,
                                  const CartographyOptions& options = {});

struct EpsilonVerdict {
  enum class Kind { NoSolution, Solution, Unknown };
  Kind kind = Kind::Unknown;
  Rat epsilon = 0;
  int certifying_horizon = -1;
  std::optional<AssembleResult> witness;
  // Exact verification transcript for Solution verdicts.
  Rat prob_phi_plus = 0;   // at the certifying horizon
  Rat expectation = 0;     // E(TS) of the witness
  bool verified = false;
};

// Sound classification from the records: NoSolution below a certified
// lower bound, Solution above a witnessed upper value (with an assembled,
// exactly verified strategy), Unknown inside the residual bracket. The
// boundary value itself stays Unknown.
EpsilonVerdict classify_epsilon(const CartographyResult& carto,
                                const Rat& epsilon, const Rat& nu1,
                                const Rat& nu2);

// CSV: one row per horizon with lower, upper, alpha, gap_bound.
std::string cartography_csv(const CartographyResult& carto);

// Strip chart: one red/white/green row per horizon plus the aggregate
// bracket band.
std::string cartography_svg(const CartographyResult& carto);

}  // namespace cartomdp
