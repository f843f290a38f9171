#include "cartomdp/unfold.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace cartomdp {

std::vector<int> UnfoldedTree::leaf_ids() const {
  std::vector<int> out;
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].leaf()) out.push_back(static_cast<int>(i));
  return out;
}

Path UnfoldedTree::history_of(int node) const {
  Path rev;
  for (int cur = node; cur != -1; cur = nodes[cur].parent)
    rev.push_back(nodes[cur].state);
  std::reverse(rev.begin(), rev.end());
  return rev;
}

Rat UnfoldedTree::acc(int weight_index, int node) const {
  Rat a = 0;
  for (int cur = node; nodes[cur].parent != -1; cur = nodes[cur].parent)
    a += mdp->weight(weight_index, nodes[nodes[cur].parent].state,
                     nodes[cur].state);
  return a;
}

UnfoldedTree unfold(const WeightedMdp& mdp, int N, long node_budget) {
  if (N < 0) throw std::invalid_argument("horizon must be nonnegative");
  UnfoldedTree t;
  t.mdp = &mdp;
  t.horizon = N;
  t.nodes.push_back({mdp.initial, 0, -1, {}});
  for (size_t qi = 0; qi < t.nodes.size(); ++qi) {
    // Index-based loop: the vector grows while we expand.
    StateId s = t.nodes[qi].state;
    int depth = t.nodes[qi].depth;
    if (s == mdp.goal || depth == N) continue;
    std::set<StateId> succ;
    for (const Edge* e : mdp.edges_from(s))
      for (auto& [target, p] : e->dist.entries) succ.insert(target);
    for (StateId target : succ) {
      if (static_cast<long>(t.nodes.size()) >= node_budget)
        throw ResourceError("unfolding to depth " + std::to_string(N) +
                            " exceeds the node budget");
      int id = static_cast<int>(t.nodes.size());
      t.nodes.push_back({target, depth + 1, static_cast<int>(qi), {}});
      t.nodes[qi].children[target] = id;
    }
  }
  t.terminal.assign(t.nodes.size(), ExtValue::finite(0));
  t.mark.assign(t.nodes.size(), LeafMark::None);
  return t;
}

UnfoldedTree hat(UnfoldedTree tree, const std::vector<ExtValue>& ssp_by_state) {
  tree.hat = true;
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    if (!n.leaf()) continue;
    if (n.state == tree.mdp->goal) {
      tree.terminal[i] = ExtValue::finite(0);
      continue;
    }
    // Depth-N leaf: one fresh edge to the goal carrying the continuation
    // value as its terminal weight.
    const ExtValue& v = ssp_by_state.at(n.state);
    tree.terminal[i] = v;
    if (v.is_plus_infinity())
      tree.mark[i] = LeafMark::Infeasible;
    else if (v.is_minus_infinity())
      tree.mark[i] = LeafMark::BottomFeasible;
  }
  return tree;
}

TreeStrategy lift_strategy(const WeightedMdp& mdp, const Strategy& sigma,
                           const UnfoldedTree& tree) {
  TreeStrategy out;
  out.nodes.resize(tree.nodes.size());
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    out.nodes[i].state = tree.nodes[i].state;
    for (auto& [st, child] : tree.nodes[i].children)
      out.nodes[i].next[st] = child;
    if (!tree.nodes[i].leaf()) {
      Path h = tree.history_of(static_cast<int>(i));
      out.nodes[i].choice = sigma.act(mdp, h);
    }
  }
  return out;
}

CompositeStrategy lower_strategy(const UnfoldedTree& tree,
                                 const TreeStrategy& tau,
                                 const MemorylessStrategy& tail) {
  CompositeStrategy out;
  out.head = tau;
  out.mid = tail;
  out.switch_step = tree.horizon;
  out.tail = tail;
  return out;
}

std::string serialize_unfolded_tree(const UnfoldedTree& tree) {
  nlohmann::json j;
  j["horizon"] = tree.horizon;
  j["variant"] = tree.hat ? "terminal-weighted" : "plain";
  j["nodes"] = nlohmann::json::array();
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    nlohmann::json row;
    row["id"] = i;
    row["state"] = tree.mdp->states[n.state];
    row["depth"] = n.depth;
    row["parent"] = n.parent;
    if (n.leaf() && tree.hat) {
      row["terminal"] = ext_str(tree.terminal[i]);
      if (tree.mark[i] == LeafMark::Infeasible) row["mark"] = "infeasible";
      if (tree.mark[i] == LeafMark::BottomFeasible)
        row["mark"] = "bottom-feasible";
    }
    nlohmann::json ch = nlohmann::json::object();
    for (auto& [st, c] : n.children) ch[tree.mdp->states[st]] = c;
    if (!n.leaf()) row["children"] = ch;
    j["nodes"].push_back(row);
  }
  return j.dump(2) + "\n";
}

}  // namespace cartomdp
