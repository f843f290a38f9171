#include "cartomdp/problem_zero.hpp"

#include <json.hpp>

#include "cartomdp/semantics.hpp"

namespace cartomdp {

namespace {

std::string counter_str(long c) {
  if (c == ProductMdp::kSaturated) return "inf";
  if (c == ProductMdp::kBottom) return "-inf";
  return std::to_string(c);
}

long long pack(StateId orig, long counter, long lo, long hi) {
  long long idx;
  if (counter == ProductMdp::kSaturated)
    idx = 0;
  else if (counter == ProductMdp::kBottom)
    idx = 1;
  else
    idx = counter - lo + 2;
  long long stride = (hi - lo) + 3;
  return static_cast<long long>(orig) * stride + idx;
}

}  // namespace

StateId ProductMdp::product_state(StateId orig, long c) const {
  auto it = index_.find(pack(orig, c, counter_lo, counter_hi));
  return it == index_.end() ? -1 : it->second;
}

ProductMdp build_product(const WeightedMdp& mdp, const Rat& nu1,
                         CounterMode mode, long state_budget) {
  CycleReport rep = cycle_report(mdp, 0);
  if (mode == CounterMode::NonNegativeCycles && !rep.all_nonnegative)
    throw AssumptionError("weight-1 cycles are not all nonnegative");
  if (mode == CounterMode::NonPositiveCycles && !rep.all_nonpositive)
    throw AssumptionError("weight-1 cycles are not all nonpositive");

  ProductMdp prod;
  prod.mode = mode;

  // Clear denominators: every weight-1 value and nu1 become integers.
  mpz_class scale = 1;
  for (auto& [pair, ws] : mdp.weights) {
    mpz_class l;
    mpz_lcm(l.get_mpz_t(), scale.get_mpz_t(), ws[0].get_den().get_mpz_t());
    scale = l;
  }
  {
    mpz_class l;
    mpz_lcm(l.get_mpz_t(), scale.get_mpz_t(), nu1.get_den().get_mpz_t());
    scale = l;
  }
  if (!scale.fits_slong_p())
    throw ResourceError("weight denominators too large to scale");
  prod.scale = scale.get_si();

  auto scaled_w1 = [&](StateId s, StateId t) {
    Rat w = mdp.weight(0, s, t) * Rat(scale);
    return static_cast<long>(mpz_class(w.get_num()).get_si());
  };
  {
    Rat nu1s = nu1 * Rat(scale);
    prod.nu1_scaled = static_cast<long>(mpz_class(nu1s.get_num()).get_si());
  }

  long big_w = 0;
  for (auto& [pair, ws] : mdp.weights) {
    long w = scaled_w1(pair.first, pair.second);
    big_w = std::max(big_w, std::labs(w));
  }
  prod.big_w = big_w;
  prod.m_bound = big_w * (mdp.n_states() + 1);
  if (mode == CounterMode::NonNegativeCycles) {
    prod.counter_lo = -prod.m_bound;
    prod.counter_hi = prod.m_bound + prod.nu1_scaled + 1;
    if (prod.counter_hi < prod.counter_lo) prod.counter_hi = prod.counter_lo;
  } else {
    prod.counter_lo = prod.nu1_scaled - 1 - prod.m_bound;
    prod.counter_hi = prod.m_bound + 1;
    if (prod.counter_lo > prod.counter_hi) prod.counter_lo = prod.counter_hi;
  }

  WeightedMdp& p = prod.mdp;
  p.weight_names = {mdp.weight_names.size() > 1 ? mdp.weight_names[1] : "w"};

  // The merged over-threshold goal comes first.
  p.states.push_back("GOAL");
  prod.orig_state.push_back(mdp.goal);
  prod.counter.push_back(ProductMdp::kSaturated);
  p.goal = 0;

  const std::string goal_loop_label = mdp.edges_from(mdp.goal)[0]->label;

  auto intern = [&](StateId orig, long c) -> StateId {
    long long key = pack(orig, c, prod.counter_lo, prod.counter_hi);
    auto it = prod.index_.find(key);
    if (it != prod.index_.end()) return it->second;
    if (static_cast<long>(p.states.size()) >= state_budget)
      throw ResourceError(
          "counter product exceeds the state budget (pseudo-polynomial "
          "bound " +
          std::to_string((prod.counter_hi - prod.counter_lo + 2) *
                         mdp.n_states()) +
          ")");
    StateId id = static_cast<StateId>(p.states.size());
    p.states.push_back(mdp.states[orig] + "#" + counter_str(c));
    prod.orig_state.push_back(orig);
    prod.counter.push_back(c);
    prod.index_[key] = id;
    return id;
  };

  auto advance = [&](long c, long delta) -> long {
    if (c == ProductMdp::kSaturated || c == ProductMdp::kBottom) return c;
    long next = c + delta;
    if (mode == CounterMode::NonNegativeCycles) {
      if (next > prod.counter_hi) return ProductMdp::kSaturated;
      if (next < prod.counter_lo)
        throw std::runtime_error("counter escaped below its certified range");
    } else {
      if (next < prod.counter_lo) return ProductMdp::kBottom;
      if (next > prod.counter_hi)
        throw std::runtime_error("counter escaped above its certified range");
    }
    return next;
  };

  auto goal_clears = [&](long c) {
    if (c == ProductMdp::kSaturated) return true;
    if (c == ProductMdp::kBottom) return false;
    return c >= prod.nu1_scaled;
  };

  StateId init;
  if (mdp.initial == mdp.goal) {
    init = goal_clears(0) ? p.goal : intern(mdp.initial, 0);
  } else {
    init = intern(mdp.initial, 0);
  }
  p.initial = init;

  for (StateId q = 0; q < static_cast<StateId>(p.states.size()); ++q) {
    StateId orig = prod.orig_state[q];
    long c = prod.counter[q];
    if (q == p.goal || orig == mdp.goal) {
      // Merged goal and under-threshold dead ends absorb.
      Edge loop;
      loop.source = q;
      loop.label = goal_loop_label;
      loop.dist.entries[q] = 1;
      p.edges.push_back(loop);
      p.weights[{q, q}] = {Rat(0)};
      continue;
    }
    for (const Edge* e : mdp.edges_from(orig)) {
      Edge pe;
      pe.source = q;
      pe.label = e->label;
      for (auto& [t, prob] : e->dist.entries) {
        long ct = advance(c, scaled_w1(orig, t));
        StateId target;
        if (t == mdp.goal && goal_clears(ct))
          target = p.goal;
        else
          target = intern(t, ct);
        pe.dist.entries[target] = prob;
        p.weights[{q, target}] = {mdp.weight(1, orig, t)};
      }
      p.edges.push_back(std::move(pe));
    }
  }

  return prod;
}

P0Result decide_p0(const WeightedMdp& mdp, const Rat& nu1, const Rat& nu2) {
  CycleReport rep = cycle_report(mdp, 0);
  CounterMode mode;
  if (rep.all_nonnegative)
    mode = CounterMode::NonNegativeCycles;
  else if (rep.all_nonpositive)
    mode = CounterMode::NonPositiveCycles;
  else
    throw AssumptionError(
        "weight-1 cycles are neither all nonnegative nor all nonpositive");

  P0Result out;
  out.mode = mode;
  ProductMdp product = build_product(mdp, nu1, mode);
  out.product_states = product.mdp.n_states();

  SafeRestriction safe = restrict_to_sure_win(product.mdp);
  out.sure_win = safe.initial_in_win;
  if (!out.sure_win) return out;

  SspResult ssp = ssp_all(safe.mdp, 0);
  out.pi = ssp.values[safe.mdp.initial];
  if (!(out.pi < ExtValue::finite(nu2))) return out;

  MemorylessStrategy ext = extension_policy(safe.mdp, ssp, 0);
  AttractorResult att = attractor_strategy(safe.mdp, 0);
  AssembleResult assembled = assemble_sigma_n_k(
      safe.mdp, 0, TreeStrategy{}, nu2, ext, att, 1000000, 0);

  out.yes = true;
  out.witness = P0Witness{std::move(product), std::move(safe),
                          std::move(assembled)};
  return out;
}

std::optional<Rat> min_ts_over_outcomes(const WeightedMdp& mdp,
                                        const CompositeStrategy& strategy,
                                        int weight_index, long step_bound) {
  // Mirrors the mass pushforward, tracking the minimum accumulation per
  // live configuration instead of the mass.
  std::map<int, Rat> in_trie;
  std::map<StateId, Rat> flat;
  std::optional<Rat> absorbed_min;

  if (mdp.initial == mdp.goal) return Rat(0);
  if (!strategy.head.nodes.empty())
    in_trie[0] = 0;
  else
    flat[mdp.initial] = 0;

  auto fold_min = [](std::optional<Rat>& slot, const Rat& v) {
    if (!slot || v < *slot) slot = v;
  };

  for (long step = 0; step < step_bound; ++step) {
    if (in_trie.empty() && flat.empty()) break;
    std::map<int, Rat> next_trie;
    std::map<StateId, Rat> next_flat;
    bool before_switch = step < strategy.switch_step;
    const MemorylessStrategy& phase =
        before_switch ? strategy.mid : strategy.tail;

    auto expand = [&](StateId s, const EdgeChoice& choice, int trie_node,
                      const Rat& acc) {
      for (auto& [label, pr] : choice) {
        if (pr == 0) continue;
        const Edge* e = mdp.edge(s, label);
        if (!e)
          throw std::runtime_error("strategy uses unknown edge " + label);
        for (auto& [t, q] : e->dist.entries) {
          Rat a = acc + mdp.weight(weight_index, s, t);
          if (t == mdp.goal) {
            fold_min(absorbed_min, a);
            continue;
          }
          int child = -1;
          if (trie_node >= 0) {
            auto it = strategy.head.nodes[trie_node].next.find(t);
            if (it != strategy.head.nodes[trie_node].next.end())
              child = it->second;
          }
          if (child >= 0) {
            auto it = next_trie.find(child);
            if (it == next_trie.end() || a < it->second) next_trie[child] = a;
          } else {
            auto it = next_flat.find(t);
            if (it == next_flat.end() || a < it->second) next_flat[t] = a;
          }
        }
      }
    };

    for (auto& [node, acc] : in_trie) {
      StateId s = strategy.head.nodes[node].state;
      if (before_switch && !strategy.head.nodes[node].choice.empty())
        expand(s, strategy.head.nodes[node].choice, node, acc);
      else {
        auto it = phase.choice.find(s);
        if (it == phase.choice.end())
          throw std::runtime_error("strategy undefined at live state");
        expand(s, it->second, -1, acc);
      }
    }
    for (auto& [s, acc] : flat) {
      auto it = phase.choice.find(s);
      if (it == phase.choice.end())
        throw std::runtime_error("strategy undefined at live state");
      expand(s, it->second, -1, acc);
    }
    in_trie = std::move(next_trie);
    flat = std::move(next_flat);
  }
  if (!in_trie.empty() || !flat.empty()) return std::nullopt;
  return absorbed_min;
}

VerifyReport verify_p0_witness(const WeightedMdp& mdp,
                               const CompositeStrategy& strategy,
                               const Rat& nu1, const Rat& nu2,
                               long step_bound) {
  VerifyReport rep;
  auto min_ts = min_ts_over_outcomes(mdp, strategy, 0, step_bound);
  if (!min_ts) {
    rep.reason = "reachability";
    return rep;
  }
  rep.min_ts_w1 = min_ts;
  if (*min_ts < nu1) {
    rep.reason = "threshold";
    return rep;
  }
  rep.expectation = expectation_ts(mdp, strategy, 1);
  if (!rep.expectation.is_finite() || !(rep.expectation.value < nu2)) {
    rep.reason = "expectation";
    return rep;
  }
  rep.ok = true;
  return rep;
}

VerifyReport verify_p0_witness(const WeightedMdp& mdp, const P0Witness& w,
                               const Rat& nu1, const Rat& nu2) {
  (void)mdp;
  (void)nu1;  // the counter gating makes the threshold structural
  VerifyReport rep;
  const WeightedMdp& safe = w.safe.mdp;
  const CompositeStrategy& strategy = w.assembled.strategy;

  // All outcomes must be absorbed by the switch step plus the attractor
  // depth (the product is acyclic in ranks under the tail).
  PhaseStepper st(safe, strategy, 0);
  long bound = w.assembled.k + safe.n_states() + 1;
  for (long j = 0; j < bound && st.live_mass() != 0; ++j) st.step();
  if (st.live_mass() != 0) {
    rep.reason = "reachability";
    return rep;
  }
  rep.expectation = ExtValue::finite(st.absorbed_acc());
  if (!(st.absorbed_acc() < nu2)) {
    rep.reason = "expectation";
    return rep;
  }
  rep.ok = true;
  return rep;
}

EdgeChoice CounterStrategy::act(const WeightedMdp& mdp,
                                std::span<const StateId> history) const {
  long c = 0;
  for (size_t j = 1; j < history.size(); ++j) {
    if (c == ProductMdp::kSaturated || c == ProductMdp::kBottom) break;
    Rat w = mdp.weight(0, history[j - 1], history[j]) * Rat(scale);
    c += static_cast<long>(mpz_class(w.get_num()).get_si());
    if (mode == CounterMode::NonNegativeCycles && c > sat_above)
      c = ProductMdp::kSaturated;
    if (mode == CounterMode::NonPositiveCycles && c < sat_below)
      c = ProductMdp::kBottom;
  }
  long steps = static_cast<long>(history.size()) - 1;
  const auto& table = steps < switch_step ? mid : tail;
  auto it = table.find({history.back(), c});
  if (it == table.end())
    throw std::runtime_error("counter strategy undefined at configuration");
  return it->second;
}

CounterStrategy counter_strategy_on_original(const WeightedMdp& mdp,
                                             const P0Witness& w) {
  (void)mdp;
  CounterStrategy out;
  out.mode = w.product.mode;
  out.scale = w.product.scale;
  out.sat_above = w.product.counter_hi;
  out.sat_below = w.product.counter_lo;
  out.switch_step = w.assembled.k;
  for (auto& [q, choice] : w.assembled.strategy.mid.choice) {
    StateId orig_q = w.safe.to_original[q];
    out.mid[{w.product.orig_state[orig_q], w.product.counter[orig_q]}] =
        choice;
  }
  for (auto& [q, choice] : w.assembled.strategy.tail.choice) {
    StateId orig_q = w.safe.to_original[q];
    out.tail[{w.product.orig_state[orig_q], w.product.counter[orig_q]}] =
        choice;
  }
  return out;
}

std::string serialize_counter_strategy(const WeightedMdp& mdp,
                                       const CounterStrategy& s) {
  nlohmann::json j;
  j["kind"] = "counter";
  j["k"] = s.switch_step;
  j["scale"] = s.scale;
  auto table = [&](const std::map<std::pair<StateId, long>, EdgeChoice>& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (auto& [key, choice] : t) {
      nlohmann::json row;
      row["state"] = mdp.states[key.first];
      row["counter"] = counter_str(key.second);
      nlohmann::json ch = nlohmann::json::object();
      for (auto& [label, p] : choice) ch[label] = rat_str(p);
      row["choice"] = ch;
      rows.push_back(row);
    }
    return rows;
  };
  j["mid"] = table(s.mid);
  j["tail"] = table(s.tail);
  return j.dump(2) + "\n";
}

}  // namespace cartomdp
