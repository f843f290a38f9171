#include <doctest.h>

#include "cartomdp/problem_zero.hpp"
#include "cartomdp/semantics.hpp"
#include "cartomdp/unfold.hpp"
#include "support/fixtures.hpp"

using namespace cartomdp;
using namespace cartomdp::testing;

TEST_CASE("the product mirrors the construction constants") {
  WeightedMdp m = fig3();
  ProductMdp p = build_product(m, Rat(1), CounterMode::NonNegativeCycles);
  CHECK(p.scale == 1);
  CHECK(p.big_w == 1);
  CHECK(p.m_bound == 4);  // max |weight| times (state count + 1)
  CHECK(p.counter_lo == -4);
  CHECK(p.counter_hi == 6);
  CHECK(p.nu1_scaled == 1);
  CHECK(validate(p.mdp).empty());
  // Reachable fragment: start, the bail-out configuration, its dead end,
  // and the merged goal.
  CHECK(p.mdp.n_states() == 4);
  CHECK(p.product_state(*m.state_id("s0"), 0) >= 0);
  CHECK(p.product_state(*m.state_id("s1"), -1) >= 0);
}

TEST_CASE("rational weights scale to integers first") {
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "half", {{"Goal", Rat(1)}}).weight("s", "Goal", make_rat(1, 2), 0);
  WeightedMdp m = b.build();
  ProductMdp p = build_product(m, make_rat(1, 4), CounterMode::NonNegativeCycles);
  CHECK(p.scale == 4);
  CHECK(p.nu1_scaled == 1);
  CHECK(p.big_w == 2);  // 1/2 scaled by 4
}

TEST_CASE("frozen counters collapse the product onto the original") {
  MdpBuilder b;
  b.initial("x").goal("Goal");
  b.edge("x", "go", {{"y", Rat(1)}}).weight("x", "y", 0, 1);
  b.edge("y", "fin", {{"Goal", Rat(1)}}).weight("y", "Goal", 0, 1);
  WeightedMdp m = b.build();
  ProductMdp p = build_product(m, Rat(0), CounterMode::NonNegativeCycles);
  CHECK(p.mdp.n_states() == m.n_states());
}

TEST_CASE("counters saturate upward and stay saturated") {
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "gain", {{"s", make_rat(1, 2)}, {"Goal", make_rat(1, 2)}});
  b.weight("s", "s", 2, 0).weight("s", "Goal", 2, 0);
  WeightedMdp m = b.build();
  ProductMdp p = build_product(m, Rat(1), CounterMode::NonNegativeCycles);
  // Walk the loop far enough and the counter must hit the sentinel.
  StateId cur = p.mdp.initial;
  StateId s_orig = *m.state_id("s");
  for (int step = 0; step < 20; ++step) {
    if (p.counter[cur] == ProductMdp::kSaturated) break;
    auto edges = p.mdp.edges_from(cur);
    StateId next = -1;
    for (auto& [t, pr] : edges[0]->dist.entries)
      if (p.orig_state[t] == s_orig) next = t;
    REQUIRE(next >= 0);
    cur = next;
  }
  CHECK(p.counter[cur] == ProductMdp::kSaturated);
  // Saturated configurations only step to saturated ones.
  for (auto& [t, pr] : p.mdp.edges_from(cur)[0]->dist.entries)
    CHECK(p.counter[t] == ProductMdp::kSaturated);
}

TEST_CASE("the mirrored mode tracks nonpositive accumulations") {
  WeightedMdp m = remark_neg_loop();
  ProductMdp p = build_product(m, Rat(0), CounterMode::NonPositiveCycles);
  CHECK(validate(p.mdp).empty());
  CHECK(p.counter_hi == m.n_states() + 1 + 1);  // big_w = 1
  // Spinning drives the counter to the bottom sentinel eventually.
  bool bottom_seen = false;
  for (StateId q = 0; q < p.mdp.n_states(); ++q)
    bottom_seen |= p.counter[q] == ProductMdp::kBottom;
  CHECK(bottom_seen);
  CHECK_THROWS_AS(build_product(m, Rat(0), CounterMode::NonNegativeCycles),
                  AssumptionError);
}

TEST_CASE("counters replay the accumulation along sampled paths") {
  std::mt19937_64 rng(7);
  RandomMdpParams params;
  params.max_states = 4;
  params.acyclic = true;
  for (int trial = 0; trial < 10; ++trial) {
    WeightedMdp m = random_mdp(rng, params);
    ProductMdp p = build_product(m, Rat(1), CounterMode::NonNegativeCycles);
    // Random walk, co-simulated.
    StateId s = m.initial;
    StateId q = p.mdp.initial;
    Rat acc = 0;
    for (int step = 0; step < 8 && s != m.goal; ++step) {
      auto edges = m.edges_from(s);
      const Edge* e = edges[rng() % edges.size()];
      // Pick a support state uniformly.
      std::vector<StateId> supp;
      for (auto& [t, pr] : e->dist.entries) supp.push_back(t);
      StateId t = supp[rng() % supp.size()];
      acc += m.weight(0, s, t) * Rat(p.scale);
      // Follow the same transition in the product.
      const Edge* pe = p.mdp.edge(q, e->label);
      REQUIRE(pe != nullptr);
      StateId qt = -1;
      for (auto& [cand, pr] : pe->dist.entries)
        if (p.orig_state[cand] == t) qt = cand;
      REQUIRE(qt >= 0);
      if (p.counter[qt] != ProductMdp::kSaturated &&
          p.mdp.goal != qt) {
        CHECK(Rat(p.counter[qt]) == acc);
      }
      s = t;
      q = qt;
    }
  }
}

TEST_CASE("saturation certifies the threshold for good") {
  // Once saturated, every continuation that reaches the goal clears the
  // bound: spot-check by exhausting continuations of bounded length.
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "up", {{"s", make_rat(1, 2)}, {"t", make_rat(1, 2)}});
  b.weight("s", "s", 2, 0).weight("s", "t", 2, 0);
  b.edge("t", "down", {{"Goal", Rat(1)}}).weight("t", "Goal", -1, 0);
  WeightedMdp m = b.build();
  Rat nu1(1);
  ProductMdp p = build_product(m, nu1, CounterMode::NonNegativeCycles);
  for (StateId q = 0; q < p.mdp.n_states(); ++q) {
    if (p.counter[q] != ProductMdp::kSaturated || q == p.mdp.goal) continue;
    // All paths from a saturated configuration keep at least the bound:
    // accumulate the worst case over 2*m_bound steps.
    std::function<void(StateId, Rat, int)> rec = [&](StateId s2, Rat acc,
                                                     int depth) {
      if (s2 == m.goal) {
        CHECK(Rat(p.counter_hi) + acc >= nu1);
        return;
      }
      if (depth > 6) return;
      for (const Edge* e : m.edges_from(s2))
        for (auto& [t, pr] : e->dist.entries)
          rec(t, acc + m.weight(0, s2, t), depth + 1);
    };
    rec(p.orig_state[q], Rat(0), 0);
  }
}

TEST_CASE("the counterexample is refused at threshold zero") {
  P0Result r = decide_p0(fig3(), Rat(1), make_rat(21, 10));
  CHECK(!r.yes);
  CHECK(!r.sure_win);
  CHECK(r.product_states == 4);
}

TEST_CASE("a one-step model is accepted with value zero") {
  WeightedMdp m = single_edge(Rat(1), Rat(0));
  P0Result r = decide_p0(m, Rat(1), Rat(1));
  CHECK(r.yes);
  CHECK(r.pi == ExtValue::finite(0));
  REQUIRE(r.witness);
  VerifyReport rep = verify_p0_witness(m, *r.witness, Rat(1), Rat(1));
  CHECK(rep.ok);
}

TEST_CASE("mixed-sign loops are refused outright") {
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "plus", {{"s", Rat(1)}}).weight("s", "s", 1, 0);
  b.edge("s", "minus", {{"t", Rat(1)}}).weight("s", "t", -1, 0);
  b.edge("t", "back", {{"s", Rat(1)}}).weight("t", "s", -1, 0);
  b.edge("t", "fin", {{"Goal", Rat(1)}}).weight("t", "Goal", 0, 0);
  WeightedMdp m = b.build();
  CHECK_THROWS_AS(decide_p0(m, Rat(0), Rat(5)), AssumptionError);
}

TEST_CASE("decisions agree with the exhaustive tree check on acyclic models") {
  std::mt19937_64 rng(13);
  RandomMdpParams params;
  params.max_states = 5;
  params.acyclic = true;
  int yes_count = 0;
  for (int trial = 0; trial < 30; ++trial) {
    WeightedMdp m = random_mdp(rng, params);
    Rat nu1(static_cast<long>(rng() % 4) - 1);
    Rat nu2(static_cast<long>(rng() % 6));
    bool expected = oracle_p0_acyclic(m, nu1, nu2);
    P0Result got = decide_p0(m, nu1, nu2);
    CHECK(got.yes == expected);
    if (!got.yes) continue;
    ++yes_count;
    VerifyReport rep = verify_p0_witness(m, *got.witness, nu1, nu2);
    CHECK(rep.ok);
  }
  CHECK(yes_count > 0);  // the sweep exercises both verdicts
}

namespace {

// The decided witness is defined exactly on the surely-winning part of the
// product; histories it never generates fall back to the attractor so the
// full unfolding can be queried.
struct PatchedStrategy final : Strategy {
  const Strategy* primary = nullptr;
  MemorylessStrategy fallback;
  EdgeChoice act(const WeightedMdp& mdp,
                 std::span<const StateId> history) const override {
    try {
      return primary->act(mdp, history);
    } catch (const std::exception&) {
      return fallback.act(mdp, history);
    }
  }
};

}  // namespace

TEST_CASE("witness strategies replay exactly on the original model") {
  std::mt19937_64 rng(19);
  RandomMdpParams params;
  params.max_states = 4;
  params.acyclic = true;
  int tested = 0;
  while (tested < 8) {
    WeightedMdp m = random_mdp(rng, params);
    Rat nu1(0);
    Rat nu2(4);
    P0Result r = decide_p0(m, nu1, nu2);
    if (!r.yes) continue;
    CounterStrategy cs = counter_strategy_on_original(m, *r.witness);
    PatchedStrategy patched;
    patched.primary = &cs;
    patched.fallback = attractor_strategy(m, 1).strategy;
    // Acyclic models exhaust within |S| steps, so the lifted image of the
    // counter strategy is a finite tree strategy on the original model.
    UnfoldedTree tree = unfold(m, m.n_states());
    TreeStrategy lifted = lift_strategy(m, patched, tree);
    AttractorResult att = attractor_strategy(m, 1);
    CompositeStrategy sigma = lower_strategy(tree, lifted, att.strategy);
    ExtValue e = expectation_ts(m, sigma, 1);
    REQUIRE(e.is_finite());
    CHECK(e.value == r.witness->assembled.expectation);
    VerifyReport rep = verify_p0_witness(m, sigma, nu1, nu2);
    CHECK(rep.ok);
    ++tested;
  }
}

TEST_CASE("direct-route strategies fail the threshold on the running example") {
  WeightedMdp m = fig1();
  MemorylessStrategy bail;
  bail.choice[*m.state_id("s0")] = {{"b", Rat(1)}};
  bail.choice[*m.state_id("s1")] = {{"d", Rat(1)}};
  bail.choice[*m.state_id("s2")] = {{"e", Rat(1)}};
  bail.choice[m.goal] = {{"loop", Rat(1)}};
  CompositeStrategy sigma;
  sigma.mid = bail;
  sigma.tail = bail;
  sigma.switch_step = 0;
  VerifyReport rep = verify_p0_witness(m, sigma, Rat(1), Rat(100));
  CHECK(!rep.ok);
  CHECK(rep.reason == "threshold");
  REQUIRE(rep.min_ts_w1);
  CHECK(*rep.min_ts_w1 == Rat(0));
}

TEST_CASE("expectation violations are named") {
  WeightedMdp m = single_edge(Rat(5), Rat(10));
  MemorylessStrategy go;
  go.choice[m.initial] = {{"go", Rat(1)}};
  go.choice[m.goal] = {{"loop", Rat(1)}};
  CompositeStrategy sigma;
  sigma.mid = go;
  sigma.tail = go;
  sigma.switch_step = 0;
  VerifyReport rep = verify_p0_witness(m, sigma, Rat(5), Rat(10));
  CHECK(!rep.ok);
  CHECK(rep.reason == "expectation");
  VerifyReport ok = verify_p0_witness(m, sigma, Rat(5), Rat(11));
  CHECK(ok.ok);
}

TEST_CASE("strategies that may never finish are refused") {
  WeightedMdp m = remark_zero_loop();
  MemorylessStrategy stay;
  stay.choice[*m.state_id("s")] = {{"a", Rat(1)}};
  stay.choice[m.goal] = {{"loop", Rat(1)}};
  CompositeStrategy sigma;
  sigma.mid = stay;
  sigma.tail = stay;
  sigma.switch_step = 0;
  VerifyReport rep = verify_p0_witness(m, sigma, Rat(0), Rat(5), 200);
  CHECK(!rep.ok);
  CHECK(rep.reason == "reachability");
}

TEST_CASE("counter strategies serialize with their tables") {
  WeightedMdp m = single_edge(Rat(1), Rat(0));
  P0Result r = decide_p0(m, Rat(1), Rat(1));
  REQUIRE(r.yes);
  CounterStrategy cs = counter_strategy_on_original(m, *r.witness);
  std::string text = serialize_counter_strategy(m, cs);
  CHECK(text.find("\"kind\": \"counter\"") != std::string::npos);
  CHECK(text.find("\"tail\"") != std::string::npos);
}
