#include "cartomdp/semantics.hpp"

#include <cmath>
#include <functional>

#include "cartomdp/analysis.hpp"

namespace cartomdp {

namespace {

bool event_counts_goal_hit(const EventSpec& ev, const Rat& acc) {
  switch (ev.kind) {
    case EventSpec::Kind::PhiPlusN: return acc >= ev.nu1;
    case EventSpec::Kind::PhiMinusN: return acc < ev.nu1;
    case EventSpec::Kind::PhiMinusOrPsiN: return acc < ev.nu1;
    case EventSpec::Kind::PsiN: return false;
    case EventSpec::Kind::ReachWithin: return true;
  }
  return false;
}

bool event_counts_survivor(const EventSpec& ev) {
  return ev.kind == EventSpec::Kind::PsiN ||
         ev.kind == EventSpec::Kind::PhiMinusOrPsiN;
}

}  // namespace

Rat probability(const WeightedMdp& mdp, const Strategy& strategy,
                const EventSpec& event, long node_budget) {
  Rat total = 0;
  long expansions = 0;
  Path history{mdp.initial};

  std::function<void(const Rat&, const Rat&)> go = [&](const Rat& mass,
                                                       const Rat& acc) {
    StateId s = history.back();
    int steps = static_cast<int>(history.size()) - 1;
    if (s == mdp.goal) {
      if (steps <= event.horizon && event_counts_goal_hit(event, acc))
        total += mass;
      return;
    }
    if (steps == event.horizon) {
      if (event_counts_survivor(event)) total += mass;
      return;
    }
    if (++expansions > node_budget)
      throw ResourceError("event enumeration exceeded the node budget");
    EdgeChoice choice = strategy.act(mdp, history);
    for (auto& [label, p] : choice) {
      if (p == 0) continue;
      const Edge* e = mdp.edge(s, label);
      if (!e) throw std::runtime_error("strategy uses unknown edge " + label);
      for (auto& [t, q] : e->dist.entries) {
        history.push_back(t);
        go(mass * p * q, acc + mdp.weight(0, s, t));
        history.pop_back();
      }
    }
  };

  if (mdp.initial == mdp.goal) {
    // Degenerate: the goal is hit at step 0 with accumulated weight 0.
    return event.horizon >= 0 && event_counts_goal_hit(event, Rat(0)) ? 1 : 0;
  }
  go(Rat(1), Rat(0));
  return total;
}

PhaseStepper::PhaseStepper(const WeightedMdp& mdp,
                           const CompositeStrategy& strategy, int weight_index)
    : mdp_(mdp), strat_(strategy), weight_index_(weight_index) {
  if (mdp.initial == mdp.goal) {
    absorbed_mass_ = 1;
  } else if (!strat_.head.nodes.empty()) {
    in_trie_[0] = {Rat(1), Rat(0)};
  } else {
    flat_[mdp.initial] = {Rat(1), Rat(0)};
  }
}

void PhaseStepper::apply_choice(StateId state, const EdgeChoice& choice,
                                int trie_node, const Rat& mass,
                                const Rat& accmass,
                                std::map<int, std::pair<Rat, Rat>>& next_trie,
                                std::map<StateId, std::pair<Rat, Rat>>& next_flat) {
  for (auto& [label, p] : choice) {
    if (p == 0) continue;
    const Edge* e = mdp_.edge(state, label);
    if (!e) throw std::runtime_error("strategy uses unknown edge " + label);
    for (auto& [t, q] : e->dist.entries) {
      Rat m = mass * p * q;
      Rat am = accmass * p * q + m * mdp_.weight(weight_index_, state, t);
      if (t == mdp_.goal) {
        absorbed_mass_ += m;
        absorbed_acc_ += am;
        continue;
      }
      int child = -1;
      if (trie_node >= 0) {
        auto it = strat_.head.nodes[trie_node].next.find(t);
        if (it != strat_.head.nodes[trie_node].next.end()) child = it->second;
      }
      if (child >= 0) {
        auto& cell = next_trie[child];
        cell.first += m;
        cell.second += am;
      } else {
        auto& cell = next_flat[t];
        cell.first += m;
        cell.second += am;
      }
    }
  }
}

void PhaseStepper::step() {
  std::map<int, std::pair<Rat, Rat>> next_trie;
  std::map<StateId, std::pair<Rat, Rat>> next_flat;
  bool before_switch = steps_ < strat_.switch_step;
  const MemorylessStrategy& phase = before_switch ? strat_.mid : strat_.tail;

  auto memoryless_choice = [&](StateId s) -> const EdgeChoice& {
    auto it = phase.choice.find(s);
    if (it == phase.choice.end())
      throw std::runtime_error("strategy undefined at live state " +
                               mdp_.states[s]);
    return it->second;
  };

  for (auto& [node, cell] : in_trie_) {
    StateId s = strat_.head.nodes[node].state;
    const EdgeChoice* choice = nullptr;
    if (before_switch && !strat_.head.nodes[node].choice.empty())
      choice = &strat_.head.nodes[node].choice;
    else
      choice = &memoryless_choice(s);
    apply_choice(s, *choice, before_switch ? node : -1, cell.first,
                 cell.second, next_trie, next_flat);
  }
  for (auto& [s, cell] : flat_) {
    apply_choice(s, memoryless_choice(s), -1, cell.first, cell.second,
                 next_trie, next_flat);
  }
  in_trie_ = std::move(next_trie);
  flat_ = std::move(next_flat);
  ++steps_;
}

Rat PhaseStepper::live_mass() const {
  Rat m = 0;
  for (auto& [node, cell] : in_trie_) m += cell.first;
  for (auto& [s, cell] : flat_) m += cell.first;
  return m;
}

Rat PhaseStepper::expected_acc() const {
  Rat a = absorbed_acc_;
  for (auto& [node, cell] : in_trie_) a += cell.second;
  for (auto& [s, cell] : flat_) a += cell.second;
  return a;
}

Rat PhaseStepper::finish_with(const std::map<StateId, Rat>& tail_expected) const {
  Rat a = absorbed_acc_;
  for (auto& [s, cell] : live_by_state()) {
    auto it = tail_expected.find(s);
    if (it == tail_expected.end())
      throw std::runtime_error("missing continuation expectation");
    a += cell.second + cell.first * it->second;
  }
  return a;
}

std::map<StateId, std::pair<Rat, Rat>> PhaseStepper::live_by_state() const {
  std::map<StateId, std::pair<Rat, Rat>> out = flat_;
  for (auto& [node, cell] : in_trie_) {
    auto& slot = out[strat_.head.nodes[node].state];
    slot.first += cell.first;
    slot.second += cell.second;
  }
  return out;
}

ExtValue expectation_ts(const WeightedMdp& mdp,
                        const CompositeStrategy& strategy, int weight_index) {
  PhaseStepper st(mdp, strategy, weight_index);
  long k = std::max<long>(strategy.switch_step,
                          strategy.head.nodes.empty()
                              ? 0
                              : strategy.head.depth());
  for (long j = 0; j < k; ++j) st.step();
  if (st.live_mass() == 0) return ExtValue::finite(st.absorbed_acc());

  auto tail_values = expected_cost_to_goal(mdp, strategy.tail, weight_index);
  std::map<StateId, Rat> finite_tail;
  for (auto& [s, cell] : st.live_by_state()) {
    auto it = tail_values.find(s);
    if (it == tail_values.end() || !it->second.is_finite())
      return ExtValue::plus_infinity();
    finite_tail[s] = it->second.value;
  }
  // Trie-resident mass past the switch step cannot remain: the stepper
  // moved everything through at least head-depth steps.
  return ExtValue::finite(st.finish_with(finite_tail));
}

ExtValue expectation_ts(const WeightedMdp& mdp,
                        const MemorylessStrategy& strategy, int weight_index) {
  CompositeStrategy c;
  c.mid = strategy;
  c.tail = strategy;
  c.switch_step = 0;
  return expectation_ts(mdp, c, weight_index);
}

Rat ts_threshold_probability(const WeightedMdp& mdp,
                             const MemorylessStrategy& strategy,
                             int weight_index, const Rat& nu, bool at_least,
                             long budget) {
  // Lazily built accumulation chain: nodes are (state, acc) pairs.
  using Key = std::pair<StateId, Rat>;
  std::map<Key, int> index;
  std::vector<Key> nodes;
  std::vector<std::vector<std::pair<int, Rat>>> trans;

  auto intern = [&](const Key& key) {
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    if (static_cast<long>(nodes.size()) >= budget)
      throw ResourceError("accumulation chain exceeded the budget");
    int id = static_cast<int>(nodes.size());
    index[key] = id;
    nodes.push_back(key);
    trans.emplace_back();
    return id;
  };

  int root = intern({mdp.initial, Rat(0)});
  for (size_t v = 0; v < nodes.size(); ++v) {
    auto [s, acc] = nodes[v];
    if (s == mdp.goal) continue;  // absorbing
    auto it = strategy.choice.find(s);
    if (it == strategy.choice.end())
      throw std::runtime_error("strategy undefined at state " + mdp.states[s]);
    for (auto& [label, p] : it->second) {
      if (p == 0) continue;
      const Edge* e = mdp.edge(s, label);
      for (auto& [t, q] : e->dist.entries) {
        // intern() may grow `trans`; take the child id before indexing.
        int child = intern({t, acc + mdp.weight(weight_index, s, t)});
        Rat prob = p * q;
        trans[v].push_back({child, std::move(prob)});
      }
    }
  }

  // Absorption probabilities into goal nodes, split by threshold.
  int m = static_cast<int>(nodes.size());
  std::vector<int> sysidx(m, -1);
  std::vector<int> rows;
  for (int v = 0; v < m; ++v)
    if (nodes[v].first != mdp.goal) {
      sysidx[v] = static_cast<int>(rows.size());
      rows.push_back(v);
    }
  // Two right-hand sides: absorb-good mass and absorb-any mass.
  int dim = static_cast<int>(rows.size());
  std::vector<std::vector<Rat>> a(dim, std::vector<Rat>(dim, Rat(0)));
  std::vector<Rat> bg(dim, Rat(0)), ba(dim, Rat(0));
  auto good = [&](const Rat& acc) { return at_least ? acc >= nu : acc < nu; };
  for (int r = 0; r < dim; ++r) {
    int v = rows[r];
    a[r][r] = 1;
    for (auto& [t, p] : trans[v]) {
      if (nodes[t].first == mdp.goal) {
        ba[r] += p;
        if (good(nodes[t].second)) bg[r] += p;
      } else {
        a[r][sysidx[t]] -= p;
      }
    }
  }
  Rat p_good, p_any;
  if (nodes[root].first == mdp.goal) {
    p_any = 1;
    p_good = good(nodes[root].second) ? 1 : 0;
  } else if (dim > 0) {
    auto xg = solve_linear_system(a, bg);
    auto xa = solve_linear_system(a, ba);
    p_good = xg[sysidx[root]];
    p_any = xa[sysidx[root]];
  }
  // Never-absorbed mass has TS = +infinity, which satisfies ">= nu" only.
  if (at_least) return p_good + (Rat(1) - p_any);
  return p_good;
}

namespace {

StateId sample_from(const Distribution& d, std::mt19937_64& rng) {
  // Rational probabilities sampled exactly via a common denominator.
  mpz_class denom = 1;
  for (auto& [t, p] : d.entries) {
    mpz_class m;
    mpz_lcm(m.get_mpz_t(), denom.get_mpz_t(), p.get_den().get_mpz_t());
    denom = m;
  }
  // denom fits comfortably in 64 bits for model-scale distributions.
  unsigned long total = denom.get_ui();
  std::uniform_int_distribution<unsigned long> pick(0, total - 1);
  unsigned long x = pick(rng);
  unsigned long upto = 0;
  for (auto& [t, p] : d.entries) {
    mpz_class units = p.get_num() * (denom / p.get_den());
    upto += units.get_ui();
    if (x < upto) return t;
  }
  return d.entries.rbegin()->first;
}

std::string pick_label(const EdgeChoice& choice, std::mt19937_64& rng) {
  mpz_class denom = 1;
  for (auto& [l, p] : choice) {
    mpz_class m;
    mpz_lcm(m.get_mpz_t(), denom.get_mpz_t(), p.get_den().get_mpz_t());
    denom = m;
  }
  unsigned long total = denom.get_ui();
  std::uniform_int_distribution<unsigned long> pick(0, total - 1);
  unsigned long x = pick(rng);
  unsigned long upto = 0;
  for (auto& [l, p] : choice) {
    mpz_class units = p.get_num() * (denom / p.get_den());
    upto += units.get_ui();
    if (x < upto) return l;
  }
  return choice.rbegin()->first;
}

constexpr double kZ99 = 2.5758293035489004;

}  // namespace

McResult monte_carlo_event(const WeightedMdp& mdp, const Strategy& strategy,
                           const EventSpec& event, int samples,
                           std::uint64_t seed, int step_cap) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  std::mt19937_64 rng(seed);
  long hits = 0;
  int capped = 0;
  for (int run = 0; run < samples; ++run) {
    Path history{mdp.initial};
    Rat acc = 0;
    bool scored = false;
    for (int step = 0; step <= std::min(event.horizon, step_cap); ++step) {
      StateId s = history.back();
      if (s == mdp.goal) {
        if (step <= event.horizon && event_counts_goal_hit(event, acc)) ++hits;
        scored = true;
        break;
      }
      if (step == event.horizon) {
        if (event_counts_survivor(event)) ++hits;
        scored = true;
        break;
      }
      EdgeChoice choice = strategy.act(mdp, history);
      std::string label = pick_label(choice, rng);
      const Edge* e = mdp.edge(s, label);
      StateId t = sample_from(e->dist, rng);
      acc += mdp.weight(0, s, t);
      history.push_back(t);
    }
    if (!scored) ++capped;
  }
  McResult out;
  out.capped = capped;
  double p = static_cast<double>(hits) / samples;
  out.estimate = p;
  out.half_width = kZ99 * std::sqrt(std::max(p * (1 - p), 1e-12) / samples);
  return out;
}

McResult monte_carlo_ts_threshold(const WeightedMdp& mdp,
                                  const Strategy& strategy, int weight_index,
                                  const Rat& nu, int samples,
                                  std::uint64_t seed, int step_cap) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  std::mt19937_64 rng(seed);
  long hits = 0;
  int capped = 0;
  for (int run = 0; run < samples; ++run) {
    Path history{mdp.initial};
    Rat acc = 0;
    bool done = false;
    for (int step = 0; step < step_cap; ++step) {
      StateId s = history.back();
      if (s == mdp.goal) {
        if (acc >= nu) ++hits;
        done = true;
        break;
      }
      EdgeChoice choice = strategy.act(mdp, history);
      std::string label = pick_label(choice, rng);
      const Edge* e = mdp.edge(s, label);
      StateId t = sample_from(e->dist, rng);
      acc += mdp.weight(weight_index, s, t);
      history.push_back(t);
    }
    if (!done) ++capped;
  }
  McResult out;
  out.capped = capped;
  double p = static_cast<double>(hits) / samples;
  out.estimate = p;
  out.half_width = kZ99 * std::sqrt(std::max(p * (1 - p), 1e-12) / samples);
  return out;
}

McResult monte_carlo_ts(const WeightedMdp& mdp, const Strategy& strategy,
                        int weight_index, int samples, std::uint64_t seed,
                        int step_cap) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<double> values;
  int capped = 0;
  for (int run = 0; run < samples; ++run) {
    Path history{mdp.initial};
    Rat acc = 0;
    bool done = false;
    for (int step = 0; step < step_cap; ++step) {
      StateId s = history.back();
      if (s == mdp.goal) {
        done = true;
        break;
      }
      EdgeChoice choice = strategy.act(mdp, history);
      std::string label = pick_label(choice, rng);
      const Edge* e = mdp.edge(s, label);
      StateId t = sample_from(e->dist, rng);
      acc += mdp.weight(weight_index, s, t);
      history.push_back(t);
    }
    if (done || history.back() == mdp.goal)
      values.push_back(rat_double(acc));
    else
      ++capped;
  }
  McResult out;
  out.capped = capped;
  if (values.empty()) return out;
  double mean = 0;
  for (double v : values) mean += v;
  mean /= values.size();
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = values.size() > 1 ? var / (values.size() - 1) : 0;
  out.estimate = mean;
  out.half_width = kZ99 * std::sqrt(var / values.size());
  return out;
}

}  // namespace cartomdp
