#include <doctest.h>

#include <functional>
#include <set>

#include "cartomdp/semantics.hpp"
#include "cartomdp/unfold.hpp"
#include "support/fixtures.hpp"

using namespace cartomdp;
using namespace cartomdp::testing;

namespace {

// Distinct goal-absorbed histories of length <= n, counted directly.
long count_histories(const WeightedMdp& m, int n) {
  long count = 0;
  std::function<void(StateId, int)> rec = [&](StateId s, int depth) {
    ++count;
    if (s == m.goal || depth == n) return;
    std::set<StateId> succ;
    for (const Edge* e : m.edges_from(s))
      for (auto& [t, p] : e->dist.entries) succ.insert(t);
    for (StateId t : succ) rec(t, depth + 1);
  };
  rec(m.initial, 0);
  return count;
}

MemorylessStrategy example_sigma(const WeightedMdp& m) {
  MemorylessStrategy s;
  s.choice[*m.state_id("s0")] = {{"a", make_rat(1, 2)}, {"b", make_rat(1, 2)}};
  s.choice[*m.state_id("s1")] = {{"c", Rat(1)}};
  s.choice[*m.state_id("s2")] = {{"e", Rat(1)}};
  s.choice[m.goal] = {{"loop", Rat(1)}};
  return s;
}

}  // namespace

TEST_CASE("shallow unfoldings have the expected shape") {
  WeightedMdp m = fig1();
  UnfoldedTree t1 = unfold(m, 1);
  CHECK(t1.nodes.size() == 3);  // root plus the two successor states
  CHECK(t1.nodes[0].state == m.initial);
  CHECK(t1.nodes[0].children.size() == 2);

  UnfoldedTree t0 = unfold(m, 0);
  CHECK(t0.nodes.size() == 1);
  CHECK(t0.nodes[0].leaf());

  WeightedMdp m3 = fig3();
  UnfoldedTree t2 = unfold(m3, 2);
  CHECK(t2.nodes.size() == 8);  // 1 + 3 + (3 below the loop child, 1 below b)
  // The stochastic branch below the depth-1 loop child splits to the goal
  // and back to the start state.
  int loop_child = t2.nodes[0].children.at(*m3.state_id("s0"));
  CHECK(t2.nodes[loop_child].children.count(m3.goal) == 1);
  CHECK(t2.nodes[loop_child].children.count(*m3.state_id("s0")) == 1);
}

TEST_CASE("node counts equal history counts") {
  for (const WeightedMdp& m : {fig1(), fig3()}) {
    for (int n = 0; n <= 4; ++n)
      CHECK(static_cast<long>(unfold(m, n).nodes.size()) ==
            count_histories(m, n));
  }
}

TEST_CASE("tiny budgets fail loudly") {
  CHECK_THROWS_AS(unfold(fig3(), 8, 5), ResourceError);
}

TEST_CASE("terminal weights attach the continuation values") {
  WeightedMdp m = fig1();
  SspResult ssp = ssp_all(m, 1);
  UnfoldedTree t = hat(unfold(m, 1), ssp.values);
  CHECK(t.hat);
  int s1_leaf = t.nodes[0].children.at(*m.state_id("s1"));
  CHECK(t.terminal[s1_leaf] == ExtValue::finite(-2));
  int goal_leaf = t.nodes[0].children.at(m.goal);
  CHECK(t.terminal[goal_leaf] == ExtValue::finite(0));
  CHECK(t.mark[s1_leaf] == LeafMark::None);
}

TEST_CASE("unreachable continuations mark leaves infeasible") {
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "risky", {{"dead", make_rat(1, 2)}, {"Goal", make_rat(1, 2)}});
  b.weight("s", "dead", 0, 0).weight("s", "Goal", 0, 0);
  b.edge("s", "safe", {{"Goal", Rat(1)}});
  b.edge("dead", "stay", {{"dead", Rat(1)}}).weight("dead", "dead", 0, 0);
  WeightedMdp m = b.build();
  SspResult ssp = ssp_all(m, 1);
  UnfoldedTree t = hat(unfold(m, 1), ssp.values);
  int dead_leaf = t.nodes[0].children.at(*m.state_id("dead"));
  CHECK(t.mark[dead_leaf] == LeafMark::Infeasible);
}

TEST_CASE("lifting the worked strategy keeps its root split") {
  WeightedMdp m = fig1();
  UnfoldedTree t = unfold(m, 1);
  TreeStrategy lifted = lift_strategy(m, example_sigma(m), t);
  CHECK(lifted.nodes[0].choice.at("a") == make_rat(1, 2));
  CHECK(lifted.nodes[0].choice.at("b") == make_rat(1, 2));

  MemorylessStrategy dirac;
  dirac.choice[*m.state_id("s0")] = {{"a", Rat(1)}};
  TreeStrategy d = lift_strategy(m, dirac, t);
  CHECK(d.nodes[0].choice.size() == 1);
  CHECK(d.nodes[0].choice.at("a") == Rat(1));
}

TEST_CASE("lifting preserves event probabilities at every horizon") {
  std::mt19937_64 rng(41);
  for (const WeightedMdp& m : {fig1(), fig3()}) {
    AttractorResult att = attractor_strategy(m, 1);
    for (int n = 1; n <= 4; ++n) {
      UnfoldedTree tree = unfold(m, n);
      for (int trial = 0; trial < 4; ++trial) {
        TreeStrategy random = random_tree_strategy(m, n, rng);
        CompositeStrategy sigma = lower_strategy(tree, random, att.strategy);
        // The lift of the composite, lowered again, agrees on the events
        // decided within the horizon.
        TreeStrategy relift = lift_strategy(m, sigma, tree);
        CompositeStrategy again = lower_strategy(tree, relift, att.strategy);
        for (auto kind : {EventSpec::Kind::PhiPlusN, EventSpec::Kind::PhiMinusN,
                          EventSpec::Kind::PsiN}) {
          EventSpec ev{kind, n, Rat(1)};
          CHECK(probability(m, sigma, ev) == probability(m, again, ev));
        }
      }
    }
  }
}

TEST_CASE("pruned expectations never exceed the extended ones") {
  // On the terminal-weighted tree, a strategy's expectation closes with
  // the best continuation, so any concrete tail does at least as badly;
  // the optimal-policy tail attains it.
  std::mt19937_64 rng(43);
  WeightedMdp m = fig1();
  SspResult ssp = ssp_all(m, 1);
  AttractorResult att = attractor_strategy(m, 1);
  for (int n = 1; n <= 3; ++n) {
    UnfoldedTree tree = hat(unfold(m, n), ssp.values);
    for (int trial = 0; trial < 5; ++trial) {
      TreeStrategy tau = random_tree_strategy(m, n, rng);
      // Hat-tree expectation: mass-weighted accumulation plus terminals.
      Rat q = 0;
      std::function<void(int, Rat, Rat)> walk = [&](int node, Rat mass,
                                                    Rat acc) {
        const TreeNode& tn = tree.nodes[node];
        if (tn.leaf()) {
          q += mass * (acc + tree.terminal[node].value);
          return;
        }
        for (auto& [label, p] : tau.nodes[node].choice) {
          const Edge* e = m.edge(tn.state, label);
          for (auto& [t, pr] : e->dist.entries)
            walk(tn.children.at(t), mass * p * pr,
                 acc + m.weight(1, tn.state, t));
        }
      };
      walk(0, Rat(1), Rat(0));

      CompositeStrategy with_attractor = lower_strategy(tree, tau, att.strategy);
      ExtValue e_att = expectation_ts(m, with_attractor, 1);
      REQUIRE(e_att.is_finite());
      CHECK(q <= e_att.value);

      CompositeStrategy with_optimal = lower_strategy(tree, tau, ssp.policy);
      ExtValue e_opt = expectation_ts(m, with_optimal, 1);
      REQUIRE(e_opt.is_finite());
      CHECK(q == e_opt.value);
    }
  }
}

TEST_CASE("the debug dump carries ids, marks and terminals") {
  WeightedMdp m = fig1();
  SspResult ssp = ssp_all(m, 1);
  UnfoldedTree t = hat(unfold(m, 2), ssp.values);
  std::string dump = serialize_unfolded_tree(t);
  CHECK(dump.find("\"horizon\": 2") != std::string::npos);
  CHECK(dump.find("terminal-weighted") != std::string::npos);
  CHECK(dump.find("\"state\": \"s1\"") != std::string::npos);
}
