#include "cartomdp/analysis.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <set>

namespace cartomdp {

namespace {

// Tarjan SCC, iterative. Returns component ids in reverse topological order
// (an SCC's id is larger than the ids of the SCCs it can reach).
std::vector<int> scc_components(const std::vector<std::vector<int>>& adj,
                                const std::vector<bool>& alive) {
  int n = static_cast<int>(adj.size());
  std::vector<int> comp(n, -1), low(n, 0), idx(n, -1), stk;
  std::vector<bool> on_stack(n, false);
  int counter = 0, comps = 0;

  struct Frame {
    int v;
    size_t child;
  };

  for (int root = 0; root < n; ++root) {
    if (!alive[root] || idx[root] != -1) continue;
    std::vector<Frame> call{{root, 0}};
    idx[root] = low[root] = counter++;
    stk.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.child < adj[f.v].size()) {
        int w = adj[f.v][f.child++];
        if (!alive[w]) continue;
        if (idx[w] == -1) {
          idx[w] = low[w] = counter++;
          stk.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], idx[w]);
        }
      } else {
        if (low[f.v] == idx[f.v]) {
          while (true) {
            int w = stk.back();
            stk.pop_back();
            on_stack[w] = false;
            comp[w] = comps;
            if (w == f.v) break;
          }
          comps++;
        }
        int v = f.v;
        call.pop_back();
        if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      }
    }
  }
  return comp;
}

// Exact Gaussian elimination; solves A x = b. A must be square and
// nonsingular on the given system.
std::vector<Rat> solve_linear(std::vector<std::vector<Rat>> a,
                              std::vector<Rat> b) {
  int n = static_cast<int>(a.size());
  for (int col = 0; col < n; ++col) {
    int pivot = -1;
    for (int r = col; r < n; ++r)
      if (a[r][col] != 0) {
        pivot = r;
        break;
      }
    if (pivot < 0) throw std::runtime_error("singular linear system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    Rat inv = a[col][col];
    for (int r = 0; r < n; ++r) {
      if (r == col || a[r][col] == 0) continue;
      Rat factor = a[r][col] / inv;
      for (int c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  std::vector<Rat> x(n);
  for (int i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

// Markov chain induced by a memoryless strategy on the states reachable
// from `start`.
struct Chain {
  std::vector<StateId> states;              // reachable states
  std::vector<int> index_of;                // StateId -> chain index or -1
  std::vector<std::vector<std::pair<int, Rat>>> trans;  // merged rows
  std::vector<Rat> cost;                    // expected step cost (weight i)
};

Chain build_chain(const WeightedMdp& mdp, const MemorylessStrategy& s,
                  StateId start, int weight_index) {
  Chain ch;
  ch.index_of.assign(mdp.n_states(), -1);
  std::vector<StateId> queue{start};
  ch.index_of[start] = 0;
  ch.states.push_back(start);
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    StateId v = queue[qi];
    auto it = s.choice.find(v);
    if (it == s.choice.end())
      throw std::runtime_error("strategy undefined at reachable state " +
                               mdp.states[v]);
    std::map<StateId, Rat> row;
    Rat c = 0;
    for (auto& [label, p] : it->second) {
      if (p == 0) continue;
      const Edge* e = mdp.edge(v, label);
      if (!e) throw std::runtime_error("strategy uses unknown edge " + label);
      for (auto& [t, q] : e->dist.entries) {
        row[t] += p * q;
        c += p * q * mdp.weight(weight_index, v, t);
      }
    }
    std::vector<std::pair<int, Rat>> merged;
    for (auto& [t, q] : row) {
      if (ch.index_of[t] == -1) {
        ch.index_of[t] = static_cast<int>(ch.states.size());
        ch.states.push_back(t);
        queue.push_back(t);
      }
      merged.push_back({ch.index_of[t], q});
    }
    ch.trans.push_back(std::move(merged));
    ch.cost.push_back(std::move(c));
  }
  return ch;
}

// Chain states from which the goal is reached with probability 1: those
// whose reachable bottom components are all the goal.
std::vector<bool> chain_as_goal(const Chain& ch, const WeightedMdp& mdp) {
  int m = static_cast<int>(ch.states.size());
  std::vector<std::vector<int>> adj(m);
  for (int v = 0; v < m; ++v)
    for (auto& [t, p] : ch.trans[v]) adj[v].push_back(t);
  std::vector<bool> alive(m, true);
  std::vector<int> comp = scc_components(adj, alive);
  int comps = *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<bool> comp_bottom(comps, true), comp_bad(comps, false);
  for (int v = 0; v < m; ++v)
    for (int t : adj[v])
      if (comp[t] != comp[v]) comp_bottom[comp[v]] = false;
  for (int c = 0; c < comps; ++c) comp_bad[c] = comp_bottom[c];
  for (int v = 0; v < m; ++v)
    if (ch.states[v] == mdp.goal) comp_bad[comp[v]] = false;
  // Propagate badness backwards: comp ids are in reverse topological order,
  // so iterate states and push along edges until stable.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int v = 0; v < m; ++v)
      for (int t : adj[v])
        if (comp_bad[comp[t]] && !comp_bad[comp[v]]) {
          comp_bad[comp[v]] = true;
          changed = true;
        }
  }
  std::vector<bool> ok(m);
  for (int v = 0; v < m; ++v) ok[v] = !comp_bad[comp[v]];
  return ok;
}

}  // namespace

std::vector<Rat> solve_linear_system(std::vector<std::vector<Rat>> a,
                                     std::vector<Rat> b) {
  return solve_linear(std::move(a), std::move(b));
}

ReachSets compute_reach_sets(const WeightedMdp& mdp) {
  int n = mdp.n_states();
  ReachSets out;
  out.almost_sure.assign(n, false);
  out.sure.assign(n, false);
  out.sure_rank.assign(n, -1);

  std::vector<std::vector<const Edge*>> from(n);
  for (auto& e : mdp.edges) from[e.source].push_back(&e);

  // Sure winning: ranked attractor over edge supports.
  out.sure[mdp.goal] = true;
  out.sure_rank[mdp.goal] = 0;
  bool grew = true;
  while (grew) {
    grew = false;
    for (StateId s = 0; s < n; ++s) {
      if (out.sure[s]) continue;
      for (const Edge* e : from[s]) {
        bool inside = true;
        int rank = 0;
        for (auto& [t, p] : e->dist.entries) {
          if (!out.sure[t]) {
            inside = false;
            break;
          }
          rank = std::max(rank, out.sure_rank[t]);
        }
        if (inside) {
          out.sure[s] = true;
          out.sure_rank[s] = rank + 1;
          out.sure_witness.choice[s] = {{e->label, Rat(1)}};
          grew = true;
          break;
        }
      }
    }
  }
  out.sure_witness.choice[mdp.goal] = {{from[mdp.goal][0]->label, Rat(1)}};

  // Almost-sure winning: greatest fixpoint of candidate sets, each round
  // recomputing backward reachability through support-safe edges.
  std::vector<bool> cand(n, true);
  while (true) {
    std::vector<bool> r(n, false);
    std::vector<const Edge*> witness(n, nullptr);
    r[mdp.goal] = cand[mdp.goal];
    bool ch = true;
    while (ch) {
      ch = false;
      for (StateId s = 0; s < n; ++s) {
        if (r[s] || !cand[s]) continue;
        for (const Edge* e : from[s]) {
          bool safe = true, touches = false;
          for (auto& [t, p] : e->dist.entries) {
            if (!cand[t]) safe = false;
            if (r[t]) touches = true;
          }
          if (safe && touches) {
            r[s] = true;
            witness[s] = e;
            ch = true;
            break;
          }
        }
      }
    }
    if (r == cand) {
      out.almost_sure = cand;
      for (StateId s = 0; s < n; ++s)
        if (cand[s] && witness[s])
          out.prob1_witness.choice[s] = {{witness[s]->label, Rat(1)}};
      out.prob1_witness.choice[mdp.goal] = {
          {from[mdp.goal][0]->label, Rat(1)}};
      break;
    }
    cand = r;
  }
  return out;
}

std::vector<StateId> almost_sure_states(const WeightedMdp& mdp) {
  auto rs = compute_reach_sets(mdp);
  std::vector<StateId> out;
  for (StateId s = 0; s < mdp.n_states(); ++s)
    if (rs.almost_sure[s]) out.push_back(s);
  return out;
}

SafeRestriction restrict_to_sure_win(const WeightedMdp& mdp) {
  auto rs = compute_reach_sets(mdp);
  SafeRestriction out;
  out.initial_in_win = rs.sure[mdp.initial];
  out.from_original.assign(mdp.n_states(), -1);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (!rs.sure[s]) continue;
    out.from_original[s] = static_cast<StateId>(out.to_original.size());
    out.to_original.push_back(s);
    out.mdp.states.push_back(mdp.states[s]);
  }
  out.mdp.weight_names = mdp.weight_names;
  out.mdp.initial = out.initial_in_win ? out.from_original[mdp.initial] : -1;
  out.mdp.goal = out.from_original[mdp.goal];
  for (auto& e : mdp.edges) {
    if (!rs.sure[e.source]) continue;
    bool safe = true;
    for (auto& [t, p] : e.dist.entries)
      if (!rs.sure[t]) {
        safe = false;
        break;
      }
    if (!safe) continue;
    Edge ne;
    ne.source = out.from_original[e.source];
    ne.label = e.label;
    for (auto& [t, p] : e.dist.entries) ne.dist.entries[out.from_original[t]] = p;
    out.mdp.edges.push_back(std::move(ne));
  }
  for (auto& [pair, ws] : mdp.weights) {
    StateId a = out.from_original[pair.first], b = out.from_original[pair.second];
    if (a >= 0 && b >= 0) out.mdp.weights[{a, b}] = ws;
  }
  return out;
}

std::map<StateId, ExtValue> expected_cost_to_goal(const WeightedMdp& mdp,
                                                  const MemorylessStrategy& s,
                                                  int i) {
  std::map<StateId, ExtValue> out;
  std::set<StateId> starts;
  for (auto& [st, ch] : s.choice) starts.insert(st);
  // One chain per connected start keeps things simple: build from each
  // defined state lazily and merge.
  std::set<StateId> done;
  for (StateId st : starts) {
    if (done.count(st)) continue;
    Chain ch = build_chain(mdp, s, st, i);
    auto ok = chain_as_goal(ch, mdp);
    int m = static_cast<int>(ch.states.size());
    // Solve on the ok states (transitions from ok states stay ok).
    std::vector<int> sysidx(m, -1);
    std::vector<int> rows;
    for (int v = 0; v < m; ++v) {
      if (ok[v] && ch.states[v] != mdp.goal) {
        sysidx[v] = static_cast<int>(rows.size());
        rows.push_back(v);
      }
    }
    int dim = static_cast<int>(rows.size());
    std::vector<std::vector<Rat>> a(dim, std::vector<Rat>(dim, Rat(0)));
    std::vector<Rat> b(dim, Rat(0));
    for (int r = 0; r < dim; ++r) {
      int v = rows[r];
      a[r][r] = 1;
      b[r] = ch.cost[v];
      for (auto& [t, p] : ch.trans[v]) {
        if (ch.states[t] == mdp.goal) continue;
        a[r][sysidx[t]] -= p;
      }
    }
    std::vector<Rat> x;
    if (dim > 0) x = solve_linear(std::move(a), std::move(b));
    for (int v = 0; v < m; ++v) {
      StateId orig = ch.states[v];
      if (out.count(orig)) continue;
      done.insert(orig);
      if (!ok[v])
        out[orig] = ExtValue::plus_infinity();
      else if (orig == mdp.goal)
        out[orig] = ExtValue::finite(0);
      else
        out[orig] = ExtValue::finite(x[sysidx[v]]);
    }
  }
  return out;
}

std::map<StateId, Rat> reach_probability(const WeightedMdp& mdp,
                                         const MemorylessStrategy& s) {
  std::map<StateId, Rat> out;
  std::set<StateId> done;
  for (auto& [st, chs] : s.choice) {
    if (done.count(st)) continue;
    Chain ch = build_chain(mdp, s, st, 0);
    int m = static_cast<int>(ch.states.size());
    // States that can reach the goal in the chain digraph.
    std::vector<bool> can(m, false);
    bool chg = true;
    for (int v = 0; v < m; ++v)
      if (ch.states[v] == mdp.goal) can[v] = true;
    while (chg) {
      chg = false;
      for (int v = 0; v < m; ++v) {
        if (can[v]) continue;
        for (auto& [t, p] : ch.trans[v])
          if (can[t]) {
            can[v] = true;
            chg = true;
            break;
          }
      }
    }
    auto sure1 = chain_as_goal(ch, mdp);
    std::vector<int> sysidx(m, -1);
    std::vector<int> rows;
    for (int v = 0; v < m; ++v)
      if (can[v] && !sure1[v] && ch.states[v] != mdp.goal) {
        sysidx[v] = static_cast<int>(rows.size());
        rows.push_back(v);
      }
    int dim = static_cast<int>(rows.size());
    std::vector<std::vector<Rat>> a(dim, std::vector<Rat>(dim, Rat(0)));
    std::vector<Rat> b(dim, Rat(0));
    for (int r = 0; r < dim; ++r) {
      int v = rows[r];
      a[r][r] = 1;
      for (auto& [t, p] : ch.trans[v]) {
        if (sysidx[t] >= 0)
          a[r][sysidx[t]] -= p;
        else if (sure1[t] || ch.states[t] == mdp.goal)
          b[r] += p;
      }
    }
    std::vector<Rat> x;
    if (dim > 0) x = solve_linear(std::move(a), std::move(b));
    for (int v = 0; v < m; ++v) {
      StateId orig = ch.states[v];
      if (out.count(orig)) continue;
      done.insert(orig);
      if (!can[v])
        out[orig] = 0;
      else if (sure1[v] || orig == mdp.goal)
        out[orig] = 1;
      else
        out[orig] = x[sysidx[v]];
    }
  }
  return out;
}

std::vector<Mec> mec_decomposition(const WeightedMdp& mdp,
                                   const std::vector<bool>& allowed) {
  int n = mdp.n_states();
  std::vector<bool> alive =
      allowed.empty() ? std::vector<bool>(n, true) : allowed;
  std::vector<std::vector<const Edge*>> from(n);
  for (auto& e : mdp.edges) from[e.source].push_back(&e);

  std::vector<std::vector<bool>> edge_alive(n);
  for (StateId s = 0; s < n; ++s)
    edge_alive[s].assign(from[s].size(), true);

  auto edge_ok = [&](StateId s, size_t ei) {
    if (!alive[s] || !edge_alive[s][ei]) return false;
    for (auto& [t, p] : from[s][ei]->dist.entries)
      if (!alive[t]) return false;
    return true;
  };

  std::vector<int> comp;
  while (true) {
    std::vector<std::vector<int>> adj(n);
    for (StateId s = 0; s < n; ++s)
      for (size_t ei = 0; ei < from[s].size(); ++ei)
        if (edge_ok(s, ei))
          for (auto& [t, p] : from[s][ei]->dist.entries) adj[s].push_back(t);
    comp = scc_components(adj, alive);
    bool changed = false;
    for (StateId s = 0; s < n; ++s) {
      if (!alive[s]) continue;
      for (size_t ei = 0; ei < from[s].size(); ++ei) {
        if (!edge_ok(s, ei)) continue;
        for (auto& [t, p] : from[s][ei]->dist.entries) {
          if (comp[t] != comp[s]) {
            edge_alive[s][ei] = false;
            changed = true;
            break;
          }
        }
      }
    }
    for (StateId s = 0; s < n; ++s) {
      if (!alive[s]) continue;
      bool any = false;
      for (size_t ei = 0; ei < from[s].size(); ++ei)
        if (edge_ok(s, ei)) any = true;
      if (!any) {
        alive[s] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }

  std::map<int, Mec> groups;
  for (StateId s = 0; s < n; ++s) {
    if (!alive[s]) continue;
    groups[comp[s]].states.push_back(s);
    for (size_t ei = 0; ei < from[s].size(); ++ei)
      if (edge_ok(s, ei)) groups[comp[s]].edges.push_back(from[s][ei]);
  }
  std::vector<Mec> out;
  for (auto& [c, mec] : groups)
    if (!mec.edges.empty()) out.push_back(std::move(mec));
  return out;
}

namespace {

// Gain of one recurrent class of an irreducible chain: stationary
// distribution times expected step cost.
Rat class_gain(const std::vector<std::vector<std::pair<int, Rat>>>& trans,
               const std::vector<Rat>& cost, const std::vector<int>& cls) {
  int m = static_cast<int>(cls.size());
  std::vector<int> pos(trans.size(), -1);
  for (int i = 0; i < m; ++i) pos[cls[i]] = i;
  // Solve pi (P - I) = 0 with sum(pi) = 1: transpose system with the last
  // equation replaced by the normalization row.
  std::vector<std::vector<Rat>> a(m, std::vector<Rat>(m, Rat(0)));
  std::vector<Rat> b(m, Rat(0));
  for (int i = 0; i < m; ++i) {
    a[i][i] = -1;
    for (auto& [t, p] : trans[cls[i]]) {
      if (pos[t] >= 0) a[pos[t]][i] += p;
    }
  }
  for (int j = 0; j < m; ++j) a[m - 1][j] = 1;
  b[m - 1] = 1;
  auto pi = solve_linear(std::move(a), std::move(b));
  Rat g = 0;
  for (int i = 0; i < m; ++i) g += pi[i] * cost[cls[i]];
  return g;
}

}  // namespace

MecGainResult mec_min_gain_full(const WeightedMdp& mdp, int i, const Mec& mec,
                                long policy_cap) {
  MecGainResult out;
  std::vector<StateId> states = mec.states;
  std::vector<int> pos(mdp.n_states(), -1);
  for (size_t s = 0; s < states.size(); ++s) pos[states[s]] = static_cast<int>(s);

  std::vector<std::vector<const Edge*>> choices(states.size());
  bool all_nonneg = true;
  for (const Edge* e : mec.edges) {
    choices[pos[e->source]].push_back(e);
    for (auto& [t, p] : e->dist.entries)
      if (mdp.weight(i, e->source, t) < 0) all_nonneg = false;
  }
  if (all_nonneg) return out;  // gain 0; callers branch on the sign

  long count = 1;
  for (auto& c : choices) {
    count *= static_cast<long>(c.size());
    if (count > policy_cap)
      throw ResourceError("end-component gain analysis exceeds policy budget");
  }

  std::optional<Rat> best;
  MemorylessStrategy best_policy;
  std::vector<size_t> pick(states.size(), 0);
  int m = static_cast<int>(states.size());
  while (true) {
    // Chain of the pure policy restricted to the component.
    std::vector<std::vector<std::pair<int, Rat>>> trans(m);
    std::vector<Rat> cost(m, Rat(0));
    for (int v = 0; v < m; ++v) {
      const Edge* e = choices[v][pick[v]];
      for (auto& [t, p] : e->dist.entries) {
        trans[v].push_back({pos[t], p});
        cost[v] += p * mdp.weight(i, e->source, t);
      }
    }
    std::vector<std::vector<int>> adj(m);
    for (int v = 0; v < m; ++v)
      for (auto& [t, p] : trans[v]) adj[v].push_back(t);
    std::vector<bool> alive(m, true);
    auto comp = scc_components(adj, alive);
    int comps = *std::max_element(comp.begin(), comp.end()) + 1;
    std::vector<bool> bottom(comps, true);
    for (int v = 0; v < m; ++v)
      for (int t : adj[v])
        if (comp[t] != comp[v]) bottom[comp[v]] = false;
    for (int c = 0; c < comps; ++c) {
      if (!bottom[c]) continue;
      std::vector<int> cls;
      for (int v = 0; v < m; ++v)
        if (comp[v] == c) cls.push_back(v);
      Rat g = class_gain(trans, cost, cls);
      if (!best || g < *best) {
        best = g;
        best_policy.choice.clear();
        for (int v = 0; v < m; ++v)
          best_policy.choice[states[v]] = {{choices[v][pick[v]]->label, Rat(1)}};
      }
    }
    if (best && *best < 0) break;  // sign settled, policy recorded
    // Odometer step.
    int d = 0;
    while (d < m) {
      if (++pick[d] < choices[d].size()) break;
      pick[d] = 0;
      ++d;
    }
    if (d == m) break;
  }
  out.gain = best.value_or(Rat(0));
  if (best) out.policy = best_policy;
  return out;
}

Rat mec_min_gain(const WeightedMdp& mdp, int i, const Mec& mec,
                 long policy_cap) {
  return mec_min_gain_full(mdp, i, mec, policy_cap).gain;
}

SspResult ssp_all(const WeightedMdp& mdp, int i) {
  int n = mdp.n_states();
  SspResult out;
  out.values.assign(n, ExtValue::plus_infinity());

  auto rs = compute_reach_sets(mdp);
  std::vector<bool> in_a = rs.almost_sure;

  std::vector<std::vector<const Edge*>> safe(n);
  for (auto& e : mdp.edges) {
    if (!in_a[e.source]) continue;
    bool ok = true;
    for (auto& [t, p] : e.dist.entries)
      if (!in_a[t]) {
        ok = false;
        break;
      }
    if (ok) safe[e.source].push_back(&e);
  }

  // Minus-infinity region: states that can reach (within the almost-sure
  // restriction) an end component allowing a negative mean.
  auto mecs = mec_decomposition(mdp, in_a);
  std::vector<bool> neg(n, false);
  for (auto& mec : mecs) {
    bool only_goal = mec.states.size() == 1 && mec.states[0] == mdp.goal;
    if (only_goal) continue;
    if (mec_min_gain(mdp, i, mec) < 0)
      for (StateId s : mec.states) neg[s] = true;
  }
  bool grew = true;
  while (grew) {
    grew = false;
    for (StateId s = 0; s < n; ++s) {
      if (neg[s] || !in_a[s]) continue;
      for (const Edge* e : safe[s]) {
        for (auto& [t, p] : e->dist.entries)
          if (neg[t]) {
            neg[s] = true;
            grew = true;
            break;
          }
        if (neg[s]) break;
      }
    }
  }
  for (StateId s = 0; s < n; ++s)
    if (neg[s]) out.values[s] = ExtValue::minus_infinity();

  // Finite part: exact policy iteration from the almost-sure witness.
  std::vector<bool> fin(n, false);
  for (StateId s = 0; s < n; ++s) fin[s] = in_a[s] && !neg[s];
  if (!fin[mdp.goal]) return out;  // everything already classified

  MemorylessStrategy policy;
  for (StateId s = 0; s < n; ++s)
    if (fin[s]) policy.choice[s] = rs.prob1_witness.choice.at(s);

  std::map<StateId, ExtValue> val;
  int guard = 0;
  while (true) {
    if (++guard > 10000)
      throw std::runtime_error("policy iteration failed to converge");
    val = expected_cost_to_goal(mdp, policy, i);
    bool improved = false;
    for (StateId s = 0; s < n; ++s) {
      if (!fin[s] || s == mdp.goal) continue;
      ExtValue cur = val.count(s) ? val.at(s) : ExtValue::plus_infinity();
      const Edge* best_edge = nullptr;
      ExtValue best = cur;
      for (const Edge* e : safe[s]) {
        bool finite = true;
        Rat q = 0;
        for (auto& [t, p] : e->dist.entries) {
          ExtValue vt = t == mdp.goal ? ExtValue::finite(0)
                                      : (val.count(t) ? val.at(t)
                                                      : ExtValue::plus_infinity());
          if (!vt.is_finite()) {
            finite = false;
            break;
          }
          q += p * (mdp.weight(i, s, t) + vt.value);
        }
        if (!finite) continue;
        ExtValue qv = ExtValue::finite(q);
        if (qv < best) {
          best = qv;
          best_edge = e;
        }
      }
      if (best_edge) {
        policy.choice[s] = {{best_edge->label, Rat(1)}};
        improved = true;
      }
    }
    if (!improved) break;
  }

  for (StateId s = 0; s < n; ++s) {
    if (!fin[s]) continue;
    auto it = val.find(s);
    out.values[s] = it != val.end() ? it->second : ExtValue::plus_infinity();
    if (s == mdp.goal) out.values[s] = ExtValue::finite(0);
  }
  // Bellman certificate: the fixed point must be optimal over safe edges.
  for (StateId s = 0; s < n; ++s) {
    if (!fin[s] || s == mdp.goal || !out.values[s].is_finite()) continue;
    for (const Edge* e : safe[s]) {
      bool finite = true;
      Rat q = 0;
      for (auto& [t, p] : e->dist.entries) {
        const ExtValue& vt = out.values[t];
        if (!vt.is_finite() && t != mdp.goal) {
          finite = false;
          break;
        }
        q += p * (mdp.weight(i, s, t) + (t == mdp.goal ? Rat(0) : vt.value));
      }
      if (finite && ExtValue::finite(q) < out.values[s])
        throw std::runtime_error("policy iteration certificate failed");
    }
  }
  out.policy = policy;
  return out;
}

ExtValue ssp_classify(const WeightedMdp& mdp, int i, StateId from) {
  return ssp_all(mdp, i).values.at(from);
}

MemorylessStrategy extension_policy(const WeightedMdp& mdp,
                                    const SspResult& ssp, int weight_index) {
  MemorylessStrategy ext = ssp.policy;
  std::vector<StateId> bottoms;
  for (StateId s = 0; s < mdp.n_states(); ++s)
    if (ssp.values[s].is_minus_infinity()) bottoms.push_back(s);
  if (bottoms.empty()) return ext;

  std::vector<bool> all(mdp.n_states(), true);
  auto mecs = mec_decomposition(mdp, all);
  std::vector<bool> routed(mdp.n_states(), false);
  for (auto& mec : mecs) {
    bool only_goal = mec.states.size() == 1 && mec.states[0] == mdp.goal;
    if (only_goal) continue;
    auto gain = mec_min_gain_full(mdp, weight_index, mec);
    if (gain.gain < 0) {
      for (auto& [s, ch] : gain.policy.choice) {
        ext.choice[s] = ch;
        routed[s] = true;
      }
    }
  }
  // Remaining bottom states step toward an already-routed one.
  bool grew = true;
  while (grew) {
    grew = false;
    for (StateId s : bottoms) {
      if (routed[s]) continue;
      for (const Edge* e : mdp.edges_from(s)) {
        bool hits = false;
        for (auto& [t, p] : e->dist.entries)
          if (routed[t]) hits = true;
        if (hits) {
          ext.choice[s] = {{e->label, Rat(1)}};
          routed[s] = true;
          grew = true;
          break;
        }
      }
    }
  }
  for (StateId s : bottoms)
    if (!routed[s])
      throw std::runtime_error("no pumping route from a bottom state");
  return ext;
}

namespace {

constexpr long kNoArc = -1;

struct SupportGraph {
  std::vector<StateId> verts;          // non-goal states
  std::vector<int> pos;                // StateId -> vertex index or -1
  std::vector<std::vector<std::optional<Rat>>> arc;  // pair weights
};

SupportGraph support_graph(const WeightedMdp& mdp, int i) {
  SupportGraph g;
  g.pos.assign(mdp.n_states(), -1);
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (s == mdp.goal) continue;
    g.pos[s] = static_cast<int>(g.verts.size());
    g.verts.push_back(s);
  }
  int m = static_cast<int>(g.verts.size());
  g.arc.assign(m, std::vector<std::optional<Rat>>(m));
  for (auto& e : mdp.edges) {
    if (e.source == mdp.goal) continue;
    for (auto& [t, p] : e.dist.entries) {
      if (t == mdp.goal) continue;
      g.arc[g.pos[e.source]][g.pos[t]] = mdp.weight(i, e.source, t);
    }
  }
  return g;
}

}  // namespace

CycleReport cycle_report(const WeightedMdp& mdp, int i) {
  CycleReport rep;
  rep.weight_index = i;
  SupportGraph g = support_graph(mdp, i);
  int m = static_cast<int>(g.verts.size());

  using Row = std::vector<std::optional<Rat>>;
  using Mat = std::vector<Row>;
  auto combine = [&](const Mat& a, const Mat& b, bool minimize) {
    Mat c(m, Row(m));
    for (int x = 0; x < m; ++x)
      for (int y = 0; y < m; ++y) {
        if (!a[x][y]) continue;
        for (int z = 0; z < m; ++z) {
          if (!b[y][z]) continue;
          Rat w = *a[x][y] + *b[y][z];
          if (!c[x][z] || (minimize ? w < *c[x][z] : w > *c[x][z]))
            c[x][z] = w;
        }
      }
    return c;
  };

  std::optional<Rat> min_walk, max_walk;
  for (int pass = 0; pass < 2; ++pass) {
    bool minimize = pass == 0;
    Mat power = g.arc;
    for (int len = 1; len <= m; ++len) {
      for (int v = 0; v < m; ++v) {
        if (!power[v][v]) continue;
        if (minimize) {
          if (!min_walk || *power[v][v] < *min_walk) min_walk = *power[v][v];
        } else {
          if (!max_walk || *power[v][v] > *max_walk) max_walk = *power[v][v];
        }
      }
      if (len < m) power = combine(power, g.arc, minimize);
    }
  }

  rep.has_cycle = min_walk.has_value();
  if (!rep.has_cycle) {
    rep.all_positive = rep.all_nonnegative = rep.all_nonpositive = true;
    return rep;
  }
  rep.all_positive = *min_walk > 0;
  rep.all_nonnegative = *min_walk >= 0;
  rep.all_nonpositive = *max_walk <= 0;
  if (rep.all_positive) rep.min_cycle_weight = *min_walk;

  // Minimum cycle mean (Karp) per SCC of the support graph.
  std::vector<std::vector<int>> adj(m);
  for (int x = 0; x < m; ++x)
    for (int y = 0; y < m; ++y)
      if (g.arc[x][y]) adj[x].push_back(y);
  std::vector<bool> alive(m, true);
  auto comp = scc_components(adj, alive);
  int comps = m == 0 ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::optional<Rat> best_mean;
  for (int c = 0; c < comps; ++c) {
    std::vector<int> verts;
    for (int v = 0; v < m; ++v)
      if (comp[v] == c) verts.push_back(v);
    int sz = static_cast<int>(verts.size());
    bool has_internal_arc = false;
    for (int a : verts)
      for (int b : verts)
        if (g.arc[a][b]) has_internal_arc = true;
    if (!has_internal_arc) continue;
    std::vector<int> pos(m, -1);
    for (int idx = 0; idx < sz; ++idx) pos[verts[idx]] = idx;
    // d[k][v]: min weight of a k-arc walk from verts[0] to v inside the SCC.
    std::vector<std::vector<std::optional<Rat>>> d(
        sz + 1, std::vector<std::optional<Rat>>(sz));
    d[0][0] = Rat(0);
    for (int k = 1; k <= sz; ++k)
      for (int a = 0; a < sz; ++a) {
        if (!d[k - 1][a]) continue;
        for (int b = 0; b < sz; ++b) {
          if (!g.arc[verts[a]][verts[b]]) continue;
          Rat w = *d[k - 1][a] + *g.arc[verts[a]][verts[b]];
          if (!d[k][b] || w < *d[k][b]) d[k][b] = w;
        }
      }
    for (int v = 0; v < sz; ++v) {
      if (!d[sz][v]) continue;
      std::optional<Rat> inner;
      for (int k = 0; k < sz; ++k) {
        if (!d[k][v]) continue;
        Rat mean = (*d[sz][v] - *d[k][v]) / Rat(sz - k);
        if (!inner || mean > *inner) inner = mean;
      }
      if (inner && (!best_mean || *inner < *best_mean)) best_mean = inner;
    }
  }
  rep.min_cycle_mean = best_mean;
  return rep;
}

Rat compute_kappa(const WeightedMdp& mdp, const Rat& nu2) {
  CycleReport rep = cycle_report(mdp, 1);
  if (!rep.all_positive)
    throw AssumptionError("weight-2 cycles are not all positive");
  Rat n(mdp.n_non_goal());
  if (!rep.has_cycle) return 0;
  Rat w2_min;
  bool first = true;
  for (auto& [pair, ws] : mdp.weights) {
    if (pair.first == mdp.goal) continue;
    if (first || ws[1] < w2_min) {
      w2_min = ws[1];
      first = false;
    }
  }
  Rat kappa = (nu2 - w2_min * n) / *rep.min_cycle_weight;
  if (kappa < 0) kappa = 0;
  return kappa;
}

N0Result compute_n0(const WeightedMdp& mdp, const Rat& nu1) {
  CycleReport rep = cycle_report(mdp, 0);
  if (!rep.all_positive)
    throw AssumptionError("weight-1 cycles are not all positive");
  long n = mdp.n_non_goal();
  N0Result out;

  Rat min_w(0), max_abs(0);
  bool first = true;
  for (auto& [pair, ws] : mdp.weights) {
    if (pair.first == mdp.goal) continue;
    if (first || ws[0] < min_w) min_w = ws[0];
    Rat a = ws[0] < 0 ? -ws[0] : ws[0];
    if (first || a > max_abs) max_abs = a;
    first = false;
  }

  if (!rep.has_cycle) {
    out.formula = std::max<long>(n, 1);
  } else {
    Rat w1_minus = Rat(n) * (min_w < 0 ? -min_w : Rat(0));
    Rat inner = (nu1 + w1_minus + Rat(n) * max_abs) / *rep.min_cycle_weight;
    long c = rat_ceil(inner);
    if (c < 0) c = 0;
    out.formula = n * c + n;
    if (out.formula < 1) out.formula = 1;
  }

  // Min-plus envelopes of goal-free paths from the initial state; the
  // certified horizon is the least K whose envelopes stay above nu1 all the
  // way to the formula bound (beyond which the closed form takes over).
  SupportGraph g = support_graph(mdp, 0);
  int m = static_cast<int>(g.verts.size());
  std::vector<std::optional<Rat>> env(m);
  if (mdp.initial != mdp.goal) {
    int v0 = g.pos[mdp.initial];
    for (int t = 0; t < m; ++t) env[t] = g.arc[v0][t];
  }
  std::vector<bool> ok(out.formula + 1, true);
  for (long k = 1; k <= out.formula; ++k) {
    if (k > 1) {
      std::vector<std::optional<Rat>> next(m);
      for (int a = 0; a < m; ++a) {
        if (!env[a]) continue;
        for (int b = 0; b < m; ++b) {
          if (!g.arc[a][b]) continue;
          Rat w = *env[a] + *g.arc[a][b];
          if (!next[b] || w < *next[b]) next[b] = w;
        }
      }
      env = std::move(next);
    }
    for (int t = 0; t < m; ++t)
      if (env[t] && *env[t] < nu1) ok[k] = false;
  }
  long certified = out.formula;
  for (long k = out.formula; k >= 1; --k) {
    if (!ok[k]) break;
    certified = k;
  }
  if (!ok[out.formula])
    throw std::runtime_error("envelope certificate failed at formula bound");
  out.certified = certified;
  return out;
}

AttractorResult attractor_strategy(const WeightedMdp& mdp, int i) {
  auto rs = compute_reach_sets(mdp);
  if (!rs.almost_sure[mdp.initial])
    throw NoAttractorError("initial state cannot reach the goal almost surely");
  AttractorResult out;
  for (StateId s = 0; s < mdp.n_states(); ++s) {
    if (!rs.almost_sure[s]) continue;
    if (rs.sure[s])
      out.strategy.choice[s] = rs.sure_witness.choice.at(s);
    else
      out.strategy.choice[s] = rs.prob1_witness.choice.at(s);
  }
  auto exp = expected_cost_to_goal(mdp, out.strategy, i);
  Rat mx(0);
  for (auto& [s, v] : exp) {
    if (!v.is_finite())
      throw std::runtime_error("attractor expectation unexpectedly infinite");
    out.expected[s] = v.value;
    if (v.value > mx) mx = v.value;
  }
  long b = rat_ceil(mx);
  out.bound = Rat(std::max<long>(b, 1));
  return out;
}

}  // namespace cartomdp
