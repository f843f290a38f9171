#include "support/fixtures.hpp"

#include <stdexcept>

#include "cartomdp/unfold.hpp"

namespace cartomdp::testing {

StateId MdpBuilder::state(const std::string& name) {
  auto it = ids_.find(name);
  if (it != ids_.end()) return it->second;
  StateId id = static_cast<StateId>(m_.states.size());
  m_.states.push_back(name);
  ids_[name] = id;
  return id;
}

MdpBuilder& MdpBuilder::initial(const std::string& name) {
  m_.initial = state(name);
  return *this;
}

MdpBuilder& MdpBuilder::goal(const std::string& name) {
  m_.goal = state(name);
  return *this;
}

MdpBuilder& MdpBuilder::edge(
    const std::string& src, const std::string& label,
    const std::vector<std::pair<std::string, Rat>>& dist) {
  Edge e;
  e.source = state(src);
  e.label = label;
  for (auto& [t, p] : dist) e.dist.entries[state(t)] = p;
  m_.edges.push_back(std::move(e));
  return *this;
}

MdpBuilder& MdpBuilder::weight(const std::string& src, const std::string& dst,
                               const Rat& w1, const Rat& w2) {
  m_.weights[{state(src), state(dst)}] = {w1, w2};
  return *this;
}

WeightedMdp MdpBuilder::build() {
  if (m_.weight_names.empty()) m_.weight_names = {"w1", "w2"};
  bool has_goal_loop = false;
  for (auto& e : m_.edges)
    if (e.source == m_.goal) has_goal_loop = true;
  if (!has_goal_loop) {
    Edge loop;
    loop.source = m_.goal;
    loop.label = "loop";
    loop.dist.entries[m_.goal] = 1;
    m_.edges.push_back(loop);
    m_.weights[{m_.goal, m_.goal}] = {Rat(0), Rat(0)};
  }
  auto violations = validate(m_);
  if (!violations.empty())
    throw std::logic_error("fixture fails validation: " +
                           violations[0].rule + " at " + violations[0].where);
  return m_;
}

WeightedMdp fig1() {
  MdpBuilder b;
  b.initial("s0").goal("Goal");
  b.edge("s0", "a", {{"Goal", Rat(1)}}).weight("s0", "Goal", 1, 5);
  b.edge("s0", "b", {{"s1", Rat(1)}}).weight("s0", "s1", 0, 0);
  b.edge("s1", "c", {{"Goal", make_rat(1, 2)}, {"s1", make_rat(1, 2)}});
  b.weight("s1", "Goal", 0, -1).weight("s1", "s1", 0, -1);
  b.edge("s1", "d", {{"s2", Rat(1)}}).weight("s1", "s2", 0, 14);
  b.edge("s2", "e", {{"Goal", Rat(1)}}).weight("s2", "Goal", 0, 0);
  return b.build();
}

WeightedMdp fig3() {
  MdpBuilder b;
  b.initial("s0").goal("Goal");
  b.edge("s0", "a", {{"s0", make_rat(1, 2)}, {"Goal", make_rat(1, 2)}});
  b.weight("s0", "s0", 0, 1).weight("s0", "Goal", 1, make_rat(11, 10));
  b.edge("s0", "b", {{"s1", Rat(1)}}).weight("s0", "s1", -1, 1);
  b.edge("s1", "c", {{"Goal", Rat(1)}}).weight("s1", "Goal", 0, 0);
  return b.build();
}

WeightedMdp remark_zero_loop() {
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "a", {{"s", Rat(1)}}).weight("s", "s", 0, 0);
  b.edge("s", "b", {{"Goal", Rat(1)}}).weight("s", "Goal", -1, 0);
  return b.build();
}

WeightedMdp remark_neg_loop() {
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "a", {{"s", Rat(1)}}).weight("s", "s", -1, 0);
  b.edge("s", "b", {{"Goal", Rat(1)}}).weight("s", "Goal", 1, 0);
  return b.build();
}

WeightedMdp single_edge(const Rat& w1, const Rat& w2) {
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "go", {{"Goal", Rat(1)}}).weight("s", "Goal", w1, w2);
  return b.build();
}

WeightedMdp random_mdp(std::mt19937_64& rng, const RandomMdpParams& params) {
  if (params.max_support > 4)
    throw std::invalid_argument("generator caps supports at 4");
  std::uniform_int_distribution<int> nstates(params.min_states,
                                             params.max_states);
  int n = nstates(rng);
  MdpBuilder b;
  std::vector<std::string> names;
  for (int i = 0; i + 1 < n; ++i) names.push_back("q" + std::to_string(i));
  names.push_back("Goal");
  b.initial(names[0]).goal("Goal");

  auto weight_value = [&](bool positive) {
    std::uniform_int_distribution<long> w(params.weight_lo, params.weight_hi);
    long v = w(rng);
    if (positive && v < 1) v = 1 - v;
    return Rat(v);
  };

  std::uniform_int_distribution<int> nedges(1, params.max_edges_per_state);
  std::uniform_int_distribution<int> nsupp(1, params.max_support);
  for (int i = 0; i + 1 < n; ++i) {
    int edges = nedges(rng);
    for (int e = 0; e < edges; ++e) {
      int support = nsupp(rng);
      std::vector<int> targets;
      std::uniform_int_distribution<int> pick_target(
          params.acyclic ? i + 1 : 0, n - 1);
      for (int s = 0; s < support; ++s) {
        int t = pick_target(rng);
        bool dup = false;
        for (int prev : targets) dup |= prev == t;
        if (!dup) targets.push_back(t);
      }
      std::vector<std::pair<std::string, Rat>> dist;
      std::vector<long> units(targets.size(), 1);
      std::uniform_int_distribution<int> bump(0, static_cast<int>(targets.size()) - 1);
      long left = 4 - static_cast<long>(targets.size());
      while (left > 0) {
        units[bump(rng)]++;
        --left;
      }
      for (size_t s = 0; s < targets.size(); ++s)
        dist.push_back({names[targets[s]], make_rat(units[s], 4)});
      b.edge(names[i], "e" + std::to_string(e), dist);
      for (int t : targets)
        b.weight(names[i], names[t], weight_value(params.w1_positive),
                 weight_value(params.w2_positive));
    }
  }
  return b.build();
}

int choice_dimension(const WeightedMdp& mdp, int n) {
  UnfoldedTree tree = unfold(mdp, n, 100000);
  int dim = 0;
  for (auto& node : tree.nodes) {
    if (node.leaf()) continue;
    dim += static_cast<int>(mdp.edges_from(node.state).size()) - 1;
  }
  return dim;
}

TreeStrategy random_tree_strategy(const WeightedMdp& mdp, int n,
                                  std::mt19937_64& rng, int denominator) {
  UnfoldedTree tree = unfold(mdp, n, 100000);
  TreeStrategy s;
  s.nodes.resize(tree.nodes.size());
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    s.nodes[i].state = tree.nodes[i].state;
    for (auto& [st, c] : tree.nodes[i].children) s.nodes[i].next[st] = c;
    if (tree.nodes[i].leaf()) continue;
    auto edges = mdp.edges_from(tree.nodes[i].state);
    std::vector<long> units(edges.size(), 0);
    std::uniform_int_distribution<int> bump(0, static_cast<int>(edges.size()) - 1);
    for (int u = 0; u < denominator; ++u) units[bump(rng)]++;
    for (size_t e = 0; e < edges.size(); ++e)
      if (units[e] > 0)
        s.nodes[i].choice[edges[e]->label] = make_rat(units[e], denominator);
  }
  return s;
}

bool oracle_p0_acyclic(const WeightedMdp& mdp, const Rat& nu1,
                       const Rat& nu2) {
  UnfoldedTree tree = unfold(mdp, mdp.n_states(), 4000000);
  int count = static_cast<int>(tree.nodes.size());
  std::vector<bool> allowed(count, false);
  std::vector<Rat> best(count, Rat(0));
  for (int i = count - 1; i >= 0; --i) {
    const TreeNode& node = tree.nodes[i];
    if (node.leaf()) {
      // Acyclic models hit the goal within |S| steps on every path.
      if (node.state != mdp.goal)
        throw std::logic_error("oracle expects acyclic-to-goal models");
      allowed[i] = tree.acc(0, i) >= nu1;
      best[i] = 0;
      continue;
    }
    bool any = false;
    Rat best_e = 0;
    for (const Edge* e : mdp.edges_from(node.state)) {
      bool ok = true;
      Rat value = 0;
      for (auto& [t, p] : e->dist.entries) {
        int child = node.children.at(t);
        if (!allowed[child]) {
          ok = false;
          break;
        }
        value += p * (mdp.weight(1, node.state, t) + best[child]);
      }
      if (!ok) continue;
      if (!any || value < best_e) best_e = value;
      any = true;
    }
    allowed[i] = any;
    best[i] = best_e;
  }
  return allowed[0] && best[0] < nu2;
}

bool p0_probe_acyclic(const WeightedMdp& mdp, const Rat& nu1, const Rat& nu2,
                      std::mt19937_64& rng) {
  UnfoldedTree tree = unfold(mdp, mdp.n_states(), 4000000);
  int count = static_cast<int>(tree.nodes.size());
  // Random choice per interior node: one edge, or an eighth-grained split
  // between two.
  std::vector<EdgeChoice> choice(count);
  for (int i = 0; i < count; ++i) {
    if (tree.nodes[i].leaf()) continue;
    auto edges = mdp.edges_from(tree.nodes[i].state);
    size_t first = rng() % edges.size();
    if (edges.size() == 1 || rng() % 2 == 0) {
      choice[i] = {{edges[first]->label, Rat(1)}};
      continue;
    }
    size_t second = rng() % edges.size();
    if (second == first) second = (first + 1) % edges.size();
    long units = 1 + static_cast<long>(rng() % 7);
    choice[i] = {{edges[first]->label, make_rat(units, 8)},
                 {edges[second]->label, make_rat(8 - units, 8)}};
  }
  // Exact sweep: minimum threshold sum and expected cost over the support.
  std::optional<Rat> min_ts;
  Rat expectation = 0;
  std::function<void(int, Rat, Rat, Rat)> walk = [&](int node, Rat mass,
                                                     Rat acc1, Rat acc2) {
    const TreeNode& tn = tree.nodes[node];
    if (tn.state == mdp.goal) {
      if (!min_ts || acc1 < *min_ts) min_ts = acc1;
      expectation += mass * acc2;
      return;
    }
    if (tn.leaf())
      throw std::logic_error("probe expects acyclic-to-goal models");
    for (auto& [label, p] : choice[node]) {
      if (p == 0) continue;
      const Edge* e = mdp.edge(tn.state, label);
      for (auto& [t, q] : e->dist.entries)
        walk(tn.children.at(t), mass * p * q,
             acc1 + mdp.weight(0, tn.state, t),
             acc2 + mdp.weight(1, tn.state, t));
    }
  };
  walk(0, Rat(1), Rat(0), Rat(0));
  return min_ts && *min_ts >= nu1 && expectation < nu2;
}

std::vector<MemorylessStrategy> pure_memoryless(const WeightedMdp& mdp) {
  std::vector<std::vector<const Edge*>> from(mdp.n_states());
  for (StateId s = 0; s < mdp.n_states(); ++s) from[s] = mdp.edges_from(s);
  std::vector<MemorylessStrategy> out;
  std::vector<size_t> pick(mdp.n_states(), 0);
  while (true) {
    MemorylessStrategy s;
    for (StateId q = 0; q < mdp.n_states(); ++q)
      s.choice[q] = {{from[q][pick[q]]->label, Rat(1)}};
    out.push_back(std::move(s));
    int d = 0;
    while (d < mdp.n_states()) {
      if (++pick[d] < from[d].size()) break;
      pick[d] = 0;
      ++d;
    }
    if (d == mdp.n_states()) break;
  }
  return out;
}

}  // namespace cartomdp::testing
