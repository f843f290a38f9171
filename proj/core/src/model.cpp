#include "cartomdp/model.hpp"

#include <set>

namespace cartomdp {

std::optional<StateId> WeightedMdp::state_id(const std::string& name) const {
  for (size_t i = 0; i < states.size(); ++i)
    if (states[i] == name) return static_cast<StateId>(i);
  return std::nullopt;
}

std::vector<const Edge*> WeightedMdp::edges_from(StateId s) const {
  std::vector<const Edge*> out;
  for (auto& e : edges)
    if (e.source == s) out.push_back(&e);
  return out;
}

const Edge* WeightedMdp::edge(StateId s, const std::string& label) const {
  for (auto& e : edges)
    if (e.source == s && e.label == label) return &e;
  return nullptr;
}

Rat WeightedMdp::weight(int i, StateId s, StateId t) const {
  auto it = weights.find({s, t});
  if (it == weights.end()) return 0;
  return it->second.at(i);
}

std::vector<Violation> validate(const WeightedMdp& mdp) {
  std::vector<Violation> out;
  auto bad = [&](std::string rule, std::string where, std::string msg) {
    out.push_back({std::move(rule), std::move(where), std::move(msg)});
  };

  int n = mdp.n_states();
  if (mdp.initial < 0 || mdp.initial >= n)
    bad("initial state", "initial", "initial state not in the state set");
  if (mdp.goal < 0 || mdp.goal >= n)
    bad("goal state", "goal", "goal state not in the state set");
  if (!out.empty()) return out;

  std::set<std::string> seen_names(mdp.states.begin(), mdp.states.end());
  if (static_cast<int>(seen_names.size()) != n)
    bad("state names", "states", "duplicate state name");

  std::vector<int> outdeg(n, 0);
  std::set<std::pair<StateId, std::string>> labels;
  for (auto& e : mdp.edges) {
    std::string where = mdp.states[e.source] + "." + e.label;
    if (e.source < 0 || e.source >= n) {
      bad("edge source", e.label, "source state out of range");
      continue;
    }
    outdeg[e.source]++;
    if (!labels.insert({e.source, e.label}).second)
      bad("label uniqueness", where, "duplicate edge label at source state");
    if (e.dist.entries.empty()) {
      bad("distribution not normalized", where, "empty distribution");
      continue;
    }
    for (auto& [t, p] : e.dist.entries) {
      if (t < 0 || t >= n)
        bad("distribution support", where, "support state out of range");
      if (p <= 0 || p > 1)
        bad("distribution not normalized", where,
            "probability outside (0,1]");
    }
    if (e.dist.total() != 1)
      bad("distribution not normalized", where,
          "probabilities sum to " + rat_str(e.dist.total()) + ", expected 1");
    for (auto& [t, p] : e.dist.entries) {
      if (t >= 0 && t < n && !mdp.has_weight(e.source, t))
        bad("missing weights", where,
            "no weight vector for supported pair (" + mdp.states[e.source] +
                "," + mdp.states[t] + ")");
    }
  }
  for (StateId s = 0; s < n; ++s)
    if (outdeg[s] == 0)
      bad("dead state", mdp.states[s], "state has no outgoing edge");

  for (auto& [pair, ws] : mdp.weights) {
    if (static_cast<int>(ws.size()) != mdp.k())
      bad("weight arity",
          mdp.states[pair.first] + "->" + mdp.states[pair.second],
          "weight vector arity differs from the declared weight count");
  }

  // Goal must be a sink: one self-loop edge, all weights zero on it.
  auto goal_edges = mdp.edges_from(mdp.goal);
  bool sink_ok = goal_edges.size() == 1;
  if (sink_ok) {
    const Edge* e = goal_edges[0];
    sink_ok = e->dist.is_dirac() &&
              e->dist.entries.begin()->first == mdp.goal;
  }
  if (!sink_ok) {
    bad("goal sink", mdp.states[mdp.goal],
        "goal state must have exactly one edge, a self-loop");
  } else if (mdp.has_weight(mdp.goal, mdp.goal)) {
    for (int i = 0; i < mdp.k(); ++i)
      if (mdp.weight(i, mdp.goal, mdp.goal) != 0)
        bad("goal loop weight nonzero", mdp.states[mdp.goal],
            "weight " + mdp.weight_names[i] + " on the goal loop is " +
                rat_str(mdp.weight(i, mdp.goal, mdp.goal)));
  }

  return out;
}

Rat accumulated_weight(const WeightedMdp& mdp, const Path& path, int i,
                       int ell) {
  if (static_cast<int>(path.size()) < ell + 1)
    throw std::runtime_error("path too short for requested step count");
  Rat acc = 0;
  for (int j = 1; j <= ell; ++j) acc += mdp.weight(i, path[j - 1], path[j]);
  return acc;
}

TsResult truncated_sum(const WeightedMdp& mdp, const Path& path, int i,
                       bool known_goal_free) {
  for (size_t j = 0; j < path.size(); ++j) {
    if (path[j] == mdp.goal) {
      return {TsResult::Tag::Finite,
              accumulated_weight(mdp, path, i, static_cast<int>(j))};
    }
  }
  if (known_goal_free) return {TsResult::Tag::PlusInfinity, 0};
  return {TsResult::Tag::Undetermined, 0};
}

PrefixClass classify_prefix(const WeightedMdp& mdp, const Path& path, int N,
                            const Rat& nu1) {
  if (static_cast<int>(path.size()) < N + 1)
    throw std::runtime_error("path too short for horizon");
  for (int j = 0; j <= N; ++j) {
    if (path[j] == mdp.goal) {
      Rat ts = accumulated_weight(mdp, path, 0, j);
      return ts >= nu1 ? PrefixClass::PhiPlus : PrefixClass::PhiMinus;
    }
  }
  return PrefixClass::Psi;
}

int TreeStrategy::depth() const {
  // Depth of the trie = longest root-to-node chain.
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    for (auto& [st, c] : nodes[i].next) {
      d[c] = d[i] + 1;
      if (d[c] > best) best = d[c];
    }
  }
  return best;
}

int TreeStrategy::resolve(std::span<const StateId> history) const {
  if (nodes.empty()) return -1;
  int cur = 0;
  for (size_t i = 1; i < history.size(); ++i) {
    auto it = nodes[cur].next.find(history[i]);
    if (it == nodes[cur].next.end()) return -1;
    cur = it->second;
  }
  return cur;
}

}  // namespace cartomdp
