#pragma once

#include <random>
#include <string>
#include <vector>

#include "cartomdp/analysis.hpp"
#include "cartomdp/model.hpp"

namespace cartomdp::testing {

// Terse model construction for fixtures and generators. The goal self-loop
// (zero weights) is added automatically at build time.
class MdpBuilder {
 public:
  StateId state(const std::string& name);
  MdpBuilder& initial(const std::string& name);
  MdpBuilder& goal(const std::string& name);
  MdpBuilder& edge(const std::string& src, const std::string& label,
                   const std::vector<std::pair<std::string, Rat>>& dist);
  MdpBuilder& weight(const std::string& src, const std::string& dst,
                     const Rat& w1, const Rat& w2);
  WeightedMdp build();  // asserts the result validates

 private:
  WeightedMdp m_;
  std::map<std::string, StateId> ids_;
};

// Four states, five labelled edges, a uniform stochastic branch; the
// running example with weights (1,5) on the direct exit and a
// repeatable -1 loop behind the branch.
WeightedMdp fig1();

// Three states; the stochastic edge at the start either exits (weights
// 1, 11/10) or loops (0, 1); the bail-out route b,c carries (-1,1),(0,0).
// With nu1=1, nu2=21/10 the lower values are 0, the upper values 2^-N,
// and the zero-threshold problem has no solution.
WeightedMdp fig3();

// Two states: a zero-weight self-loop and a (-1,0) exit. With nu1=0 the
// upper values stay 1 while the lower values stay 0.
WeightedMdp remark_zero_loop();

// Two states: a (-1,0) self-loop and a (1,0) exit. With nu1=2 the upper
// values stay 1 while the lower values stay 0.
WeightedMdp remark_neg_loop();

WeightedMdp single_edge(const Rat& w1, const Rat& w2);

// Uniformly random valid models for the property suites.
struct RandomMdpParams {
  int min_states = 2;   // including the goal
  int max_states = 5;
  int max_edges_per_state = 2;
  int max_support = 2;
  long weight_lo = -2, weight_hi = 2;
  bool w2_positive = false;   // force weight-2 edge values >= 1
  bool w1_positive = false;   // force weight-1 edge values >= 1
  bool acyclic = false;       // forward edges only (plus the goal loop)
};

WeightedMdp random_mdp(std::mt19937_64& rng, const RandomMdpParams& params);

// Free simplex dimensions of the depth-N unfolding (drives grid sizes).
int choice_dimension(const WeightedMdp& mdp, int n);

// Random tree strategy on the depth-N unfolding with grid probabilities.
TreeStrategy random_tree_strategy(const WeightedMdp& mdp, int n,
                                  std::mt19937_64& rng, int denominator = 4);

// Exact zero-threshold oracle for acyclic models: prune choices whose
// outcomes can dip below nu1, then minimize the weight-2 expectation by
// backward induction over the full unfolding (pure choices suffice).
bool oracle_p0_acyclic(const WeightedMdp& mdp, const Rat& nu1,
                       const Rat& nu2);

// Randomized probe for the same question: a random tree strategy with
// at-most-two-point support per node and eighth-grained probabilities.
// Returns whether the sample satisfies all three requirements exactly.
bool p0_probe_acyclic(const WeightedMdp& mdp, const Rat& nu1, const Rat& nu2,
                      std::mt19937_64& rng);

// All pure memoryless strategies (for small oracle sweeps).
std::vector<MemorylessStrategy> pure_memoryless(const WeightedMdp& mdp);

}  // namespace cartomdp::testing
