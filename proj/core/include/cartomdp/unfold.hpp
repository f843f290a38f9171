#pragma once

#include "cartomdp/model.hpp"

namespace cartomdp {

// Depth-N unfolding of an MDP. Nodes are in bijection with the goal-free
// histories of length <= N from the initial state (goal visits absorb, so a
// history is identified with its prefix up to the first goal visit).
// Children are keyed by successor state and shared by all edges enabling
// that state, mirroring the history bijection.
struct TreeNode {
  StateId state = -1;
  int depth = 0;
  int parent = -1;
  std::map<StateId, int> children;  // successor state -> node id
  bool leaf() const { return children.empty(); }
};

enum class LeafMark {
  None,
  Infeasible,      // +infinity continuation: any mass here is infeasible
  BottomFeasible,  // -infinity continuation: any mass here satisfies the
                   // expectation constraint outright
};

struct UnfoldedTree {
  const WeightedMdp* mdp = nullptr;
  int horizon = 0;
  bool hat = false;
  std::vector<TreeNode> nodes;      // nodes[0] is the root
  std::vector<ExtValue> terminal;   // per node; set on depth-N leaves of a
                                    // hat tree (0 on goal leaves)
  std::vector<LeafMark> mark;

  std::vector<int> leaf_ids() const;
  Path history_of(int node) const;
  // Accumulated weight of the history leading to the node.
  Rat acc(int weight_index, int node) const;
};

// Builds the plain depth-N unfolding; throws ResourceError past the budget.
UnfoldedTree unfold(const WeightedMdp& mdp, int N, long node_budget = 200000);

// Attaches terminal continuation values (per original state) to the
// depth-N leaves: finite values become terminal weights, +infinity marks
// the leaf Infeasible, -infinity marks it BottomFeasible.
UnfoldedTree hat(UnfoldedTree tree, const std::vector<ExtValue>& ssp_by_state);

// History-indexed image of a strategy on the tree (query the strategy on
// every interior node's history).
TreeStrategy lift_strategy(const WeightedMdp& mdp, const Strategy& sigma,
                           const UnfoldedTree& tree);

// Composite extension of a tree strategy: play the tree for the horizon,
// then the memoryless tail.
CompositeStrategy lower_strategy(const UnfoldedTree& tree,
                                 const TreeStrategy& tau,
                                 const MemorylessStrategy& tail);

// Debug dump mirroring the model file format, with node ids.
std::string serialize_unfolded_tree(const UnfoldedTree& tree);

}  // namespace cartomdp
