#pragma once

#include <cstdint>

#include "cartomdp/analysis.hpp"
#include "cartomdp/unfold.hpp"

namespace cartomdp {

struct NotStrictlyFeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ProblemVariant {
  Upper,  // objective: mass of goal-misses plus below-threshold hits
  Lower,  // objective: mass of below-threshold hits only
};

// One simplex of probability variables per interior tree node, one
// variable per enabled edge.
struct VarGroup {
  int node = -1;
  std::vector<std::string> labels;  // sorted; one variable each
  int first_var = 0;
  int size() const { return static_cast<int>(labels.size()); }
};

// The constrained polynomial program over a terminal-weighted tree:
// minimize P (objective mass) subject to Q (expected truncated sum with
// terminal continuation weights) staying strictly below nu2, with
// per-node simplex constraints. Both P and Q are multilinear with one
// linear block per node.
struct PolyProblem {
  const UnfoldedTree* tree = nullptr;
  Rat nu1 = 0;
  ExtValue nu2 = ExtValue::plus_infinity();
  ProblemVariant variant = ProblemVariant::Upper;

  std::vector<VarGroup> groups;
  int var_count = 0;
  std::vector<int> group_of_node;    // node -> group index or -1

  std::vector<bool> in_objective;    // per node (leaves)
  std::vector<Rat> leaf_value;       // acc_w2 + terminal on unmarked leaves
  bool has_infeasible_leaves = false;
  bool has_bottom_leaves = false;
  Rat value_bound = 0;               // max |leaf_value| over unmarked leaves

  // Flattened arcs for the hot evaluation loops: per group, per edge
  // variable, the (child node, branch probability) pairs.
  std::vector<std::vector<std::vector<std::pair<int, Rat>>>> arcs;
};

PolyProblem build_problem(const UnfoldedTree& hat_tree, const Rat& nu1,
                          const ExtValue& nu2, ProblemVariant variant);

struct Evaluation {
  Rat p = 0;         // objective mass
  Rat q = 0;         // expectation over unmarked leaves
  Rat inf_mass = 0;  // mass on +infinity-marked leaves
  Rat bot_mass = 0;  // mass on -infinity-marked leaves
};

Evaluation evaluate(const PolyProblem& problem, const std::vector<Rat>& x);

// A point is feasible when no mass reaches an infeasible leaf and either
// some mass reaches a bottom leaf (the expectation is then -infinity) or
// Q < nu2 strictly.
bool is_feasible(const PolyProblem& problem, const Evaluation& ev);

// Float mirror with exact reverse-mode gradients of P, Q and the marked
// masses (used by the projected-gradient solver and the derivative checks).
struct EvaluationF {
  double p = 0, q = 0, inf_mass = 0, bot_mass = 0;
  std::vector<double> grad_p, grad_q, grad_inf, grad_bot;
};

EvaluationF evaluate_f(const PolyProblem& problem,
                       const std::vector<double>& x, bool with_gradients);

struct SolveResult {
  bool feasible = false;  // a strictly feasible witness was found
  Rat value = 0;          // exact P(witness)
  Rat lower = 0;          // certified lower bound on the true infimum
  bool lower_certified = false;
  std::vector<Rat> witness_vars;
  TreeStrategy witness;
  enum class Method { BruteGrid, Gradient } method = Method::BruteGrid;
  Rat alpha() const { return value - lower; }
};

// Exhaustive scan of per-node simplex grids with denominator
// `grid_denominator`, in exact arithmetic. Returns the grid minimum over
// strictly feasible points (lexicographically least witness among ties)
// plus a certified lower bound on the true infimum obtained from a
// Lipschitz relaxation of the grid scan.
SolveResult solve_brute(const PolyProblem& problem, int grid_denominator,
                        long point_cap = 2000000, int var_cap = 12);

// Projected-gradient descent over the product of simplices with a
// shrinking-slack penalty for the strict constraint; the returned witness
// is re-verified feasible in exact arithmetic (rounded to rationals).
SolveResult solve_gradient(const PolyProblem& problem, int restarts,
                           double tol, std::uint64_t seed);

// Minimum of P with the expectation constraint dropped: plain backward
// induction (pure choices suffice). Oracle for the unconstrained case.
Rat backward_induction_min(const PolyProblem& problem);

TreeStrategy witness_to_strategy(const PolyProblem& problem,
                                 const std::vector<Rat>& x);

// Composite witness: play the tree witness, extend with `extension`
// (either the optimal-continuation policy or a pumping policy when the
// witness rides a bottom-marked leaf), and hand over to the attractor at
// the returned switch step. The step is the least k at which the two
// exact conditions hold: the truncated expectation is within eta/2 of the
// full expectation and the goal-miss mass is below eta/(2M).
struct AssembleResult {
  CompositeStrategy strategy;
  long k = 0;
  Rat eta = 0;
  Rat expectation = 0;  // E(TS) of the assembled strategy, exact
};

AssembleResult assemble_sigma_n_k(const WeightedMdp& mdp, long horizon,
                                  const TreeStrategy& witness, const Rat& nu2,
                                  const MemorylessStrategy& extension,
                                  const AttractorResult& attractor,
                                  long k_cap = 1000000, int weight_index = 1);

}  // namespace cartomdp
