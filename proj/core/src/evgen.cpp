#include "cartomdp/evgen.hpp"

#include <random>

#include "cartomdp/analysis.hpp"

namespace cartomdp {

EvScenario generate_ev_scenario(const EvScenarioParams& params) {
  if (params.horizon < 1 || params.levels < 1 || params.nonflex_values < 1)
    throw std::invalid_argument("scenario parameters out of range");
  if (params.capacity < params.nonflex_values - 1)
    throw std::invalid_argument(
        "capacity below the background load leaves no safe schedule");

  std::mt19937_64 rng(params.seed);

  // Per-step background-load distribution over 0..nonflex_values-1 with
  // eighth-grained probabilities, at least 1/8 each.
  std::vector<std::vector<Rat>> background(params.horizon);
  for (int t = 0; t < params.horizon; ++t) {
    int m = params.nonflex_values;
    std::vector<long> units(m, 1);
    long left = 8 - m;
    std::uniform_int_distribution<int> pick(0, m - 1);
    while (left > 0) {
      units[pick(rng)]++;
      --left;
    }
    for (int v = 0; v < m; ++v)
      background[t].push_back(make_rat(units[v], 8));
  }

  WeightedMdp m;
  m.weight_names = {"flex", "ageing"};

  auto state_name = [&](int t, int flex, long total) {
    return "t" + std::to_string(t) + "_f" + std::to_string(flex) + "_l" +
           std::to_string(total);
  };

  std::map<std::string, StateId> ids;
  auto intern = [&](const std::string& name) -> StateId {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    StateId id = static_cast<StateId>(m.states.size());
    m.states.push_back(name);
    ids[name] = id;
    return id;
  };

  StateId goal = intern("Goal");
  StateId trap = intern("overload");
  m.goal = goal;
  m.initial = intern(state_name(0, 0, 0));

  // Quadratic ageing surrogate on a transition into load `total` from a
  // state at load `prev`. The explicit return type forces evaluation of
  // the lazy expression before its operands go out of scope.
  auto ageing = [&](long prev, long total) -> Rat {
    return make_rat(total * total, 4) + make_rat(prev * prev, 8);
  };

  struct Pending {
    StateId id;
    int t;
    long total;
  };
  std::vector<Pending> queue{{m.initial, 0, 0}};
  std::map<StateId, bool> expanded;

  while (!queue.empty()) {
    Pending cur = queue.back();
    queue.pop_back();
    if (expanded[cur.id]) continue;
    expanded[cur.id] = true;

    if (cur.t == params.horizon) {
      Edge finish;
      finish.source = cur.id;
      finish.label = "finish";
      finish.dist.entries[goal] = 1;
      m.edges.push_back(finish);
      m.weights[{cur.id, goal}] = {Rat(0), Rat(0)};
      continue;
    }

    for (int flex = 0; flex < params.levels; ++flex) {
      Edge e;
      e.source = cur.id;
      e.label = "f" + std::to_string(flex);
      Rat trap_mass = 0;
      for (int nf = 0; nf < params.nonflex_values; ++nf) {
        const Rat& p = background[cur.t][nf];
        long total = flex + nf;
        if (total > params.capacity) {
          trap_mass += p;
          continue;
        }
        StateId target = intern(state_name(cur.t + 1, flex, total));
        e.dist.entries[target] = p;
        m.weights[{cur.id, target}] = {Rat(flex), ageing(cur.total, total)};
        queue.push_back({target, cur.t + 1, total});
      }
      if (trap_mass > 0) {
        e.dist.entries[trap] = trap_mass;
        // Pair weights are shared across edges; keep the trap pair
        // flex-independent (its paths never finish anyway).
        m.weights[{cur.id, trap}] = {Rat(0),
                                     ageing(cur.total, params.capacity + 1)};
      }
      m.edges.push_back(std::move(e));
    }
  }

  // Absorbing trap and goal loop.
  Edge trap_loop;
  trap_loop.source = trap;
  trap_loop.label = "stuck";
  trap_loop.dist.entries[trap] = 1;
  m.edges.push_back(trap_loop);
  m.weights[{trap, trap}] = {Rat(0), Rat(0)};

  Edge goal_loop;
  goal_loop.source = goal;
  goal_loop.label = "loop";
  goal_loop.dist.entries[goal] = 1;
  m.edges.push_back(goal_loop);
  m.weights[{goal, goal}] = {Rat(0), Rat(0)};

  EvScenario out;
  out.nu1 = Rat(params.charge_target);
  // An achievable-looking bound: one above the cheapest expected ageing.
  SspResult ssp = ssp_all(m, 1);
  out.nu2_hint = ssp.values[m.initial].is_finite()
                     ? ssp.values[m.initial].value + 1
                     : Rat(1);
  out.mdp = std::move(m);
  return out;
}

}  // namespace cartomdp
