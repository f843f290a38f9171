#include "cartomdp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "cartomdp/semantics.hpp"

namespace cartomdp {

PolyProblem build_problem(const UnfoldedTree& hat_tree, const Rat& nu1,
                          const ExtValue& nu2, ProblemVariant variant) {
  if (!hat_tree.hat)
    throw std::invalid_argument("problem construction needs a terminal-weighted tree");
  PolyProblem p;
  p.tree = &hat_tree;
  p.nu1 = nu1;
  p.nu2 = nu2;
  p.variant = variant;
  const WeightedMdp& mdp = *hat_tree.mdp;

  int node_count = static_cast<int>(hat_tree.nodes.size());
  p.group_of_node.assign(node_count, -1);
  p.in_objective.assign(node_count, false);
  p.leaf_value.assign(node_count, Rat(0));

  for (int n = 0; n < node_count; ++n) {
    const TreeNode& node = hat_tree.nodes[n];
    if (node.leaf()) {
      bool psi = node.state != mdp.goal;
      bool phi_minus = false;
      if (!psi) phi_minus = hat_tree.acc(0, n) < nu1;
      p.in_objective[n] = variant == ProblemVariant::Upper ? (psi || phi_minus)
                                                           : phi_minus;
      if (hat_tree.mark[n] == LeafMark::Infeasible) {
        p.has_infeasible_leaves = true;
      } else if (hat_tree.mark[n] == LeafMark::BottomFeasible) {
        p.has_bottom_leaves = true;
      } else {
        Rat v = hat_tree.acc(1, n) + hat_tree.terminal[n].value;
        p.leaf_value[n] = v;
        Rat a = v < 0 ? -v : v;
        if (a > p.value_bound) p.value_bound = a;
      }
      continue;
    }
    VarGroup g;
    g.node = n;
    for (const Edge* e : mdp.edges_from(node.state)) g.labels.push_back(e->label);
    std::sort(g.labels.begin(), g.labels.end());
    g.first_var = p.var_count;
    p.var_count += g.size();
    p.group_of_node[n] = static_cast<int>(p.groups.size());

    std::vector<std::vector<std::pair<int, Rat>>> per_edge;
    for (auto& label : g.labels) {
      const Edge* e = mdp.edge(node.state, label);
      std::vector<std::pair<int, Rat>> arcs;
      for (auto& [target, delta] : e->dist.entries)
        arcs.push_back({node.children.at(target), delta});
      per_edge.push_back(std::move(arcs));
    }
    p.arcs.push_back(std::move(per_edge));
    p.groups.push_back(std::move(g));
  }
  return p;
}

namespace {

struct NodeEval {
  Rat p, q, inf, bot;
};

// Bottom-up pass: nodes are stored parents-first, so a reverse sweep sees
// children before parents. The workspace is reused across grid points to
// keep rational allocations off the hot path.
void eval_nodes(const PolyProblem& pb, const std::vector<Rat>& x,
                std::vector<NodeEval>& vals) {
  const UnfoldedTree& t = *pb.tree;
  int count = static_cast<int>(t.nodes.size());
  if (static_cast<int>(vals.size()) != count)
    vals.assign(count, {Rat(0), Rat(0), Rat(0), Rat(0)});
  Rat w;
  for (int n = count - 1; n >= 0; --n) {
    const TreeNode& node = t.nodes[n];
    NodeEval& v = vals[n];
    if (node.leaf()) {
      v.p = pb.in_objective[n] ? 1 : 0;
      v.inf = t.mark[n] == LeafMark::Infeasible ? 1 : 0;
      v.bot = t.mark[n] == LeafMark::BottomFeasible ? 1 : 0;
      v.q = t.mark[n] == LeafMark::None ? pb.leaf_value[n] : Rat(0);
      continue;
    }
    v.p = 0;
    v.q = 0;
    v.inf = 0;
    v.bot = 0;
    int gi = pb.group_of_node[n];
    const VarGroup& g = pb.groups[gi];
    for (int ei = 0; ei < g.size(); ++ei) {
      const Rat& pe = x[g.first_var + ei];
      if (pe == 0) continue;
      for (auto& [child, delta] : pb.arcs[gi][ei]) {
        w = pe * delta;
        const NodeEval& c = vals[child];
        v.p += w * c.p;
        v.inf += w * c.inf;
        v.bot += w * c.bot;
        // Leaf values carry the full root-based accumulation, so q is a
        // plain mass propagation.
        v.q += w * c.q;
      }
    }
  }
}

}  // namespace

Evaluation evaluate(const PolyProblem& pb, const std::vector<Rat>& x) {
  std::vector<NodeEval> vals;
  eval_nodes(pb, x, vals);
  return {vals[0].p, vals[0].q, vals[0].inf, vals[0].bot};
}

bool is_feasible(const PolyProblem& pb, const Evaluation& ev) {
  if (ev.inf_mass != 0) return false;
  if (ev.bot_mass > 0) return true;
  if (pb.nu2.is_plus_infinity()) return true;
  return ev.q < pb.nu2.value;
}

EvaluationF evaluate_f(const PolyProblem& pb, const std::vector<double>& x,
                       bool with_gradients) {
  const UnfoldedTree& t = *pb.tree;
  int count = static_cast<int>(t.nodes.size());
  struct NV {
    double p = 0, q = 0, inf = 0, bot = 0;
  };
  std::vector<NV> vals(count);
  for (int n = count - 1; n >= 0; --n) {
    const TreeNode& node = t.nodes[n];
    if (node.leaf()) {
      if (pb.in_objective[n]) vals[n].p = 1;
      if (t.mark[n] == LeafMark::Infeasible)
        vals[n].inf = 1;
      else if (t.mark[n] == LeafMark::BottomFeasible)
        vals[n].bot = 1;
      else
        vals[n].q = rat_double(pb.leaf_value[n]);
      continue;
    }
    int gi = pb.group_of_node[n];
    const VarGroup& g = pb.groups[gi];
    for (int ei = 0; ei < g.size(); ++ei) {
      double pe = x[g.first_var + ei];
      for (auto& [child, delta] : pb.arcs[gi][ei]) {
        double w = pe * rat_double(delta);
        vals[n].p += w * vals[child].p;
        vals[n].inf += w * vals[child].inf;
        vals[n].bot += w * vals[child].bot;
        vals[n].q += w * vals[child].q;
      }
    }
  }

  EvaluationF out;
  out.p = vals[0].p;
  out.q = vals[0].q;
  out.inf_mass = vals[0].inf;
  out.bot_mass = vals[0].bot;
  if (!with_gradients) return out;

  out.grad_p.assign(pb.var_count, 0);
  out.grad_q.assign(pb.var_count, 0);
  out.grad_inf.assign(pb.var_count, 0);
  out.grad_bot.assign(pb.var_count, 0);
  // Adjoints flow parents-first. adj_q carries the reach-probability of the
  // node (the q recursion is affine in the child values).
  std::vector<NV> adj(count);
  adj[0] = {1, 1, 1, 1};
  for (int n = 0; n < count; ++n) {
    const TreeNode& node = t.nodes[n];
    if (node.leaf()) continue;
    int gi = pb.group_of_node[n];
    const VarGroup& g = pb.groups[gi];
    for (int ei = 0; ei < g.size(); ++ei) {
      double pe = x[g.first_var + ei];
      double dp = 0, dq = 0, dinf = 0, dbot = 0;
      for (auto& [child, delta] : pb.arcs[gi][ei]) {
        double d = rat_double(delta);
        dp += d * vals[child].p;
        dinf += d * vals[child].inf;
        dbot += d * vals[child].bot;
        dq += d * vals[child].q;
        adj[child].p += adj[n].p * pe * d;
        adj[child].q += adj[n].q * pe * d;
        adj[child].inf += adj[n].inf * pe * d;
        adj[child].bot += adj[n].bot * pe * d;
      }
      out.grad_p[g.first_var + ei] = adj[n].p * dp;
      out.grad_q[g.first_var + ei] = adj[n].q * dq;
      out.grad_inf[g.first_var + ei] = adj[n].inf * dinf;
      out.grad_bot[g.first_var + ei] = adj[n].bot * dbot;
    }
  }
  return out;
}

TreeStrategy witness_to_strategy(const PolyProblem& pb,
                                 const std::vector<Rat>& x) {
  const UnfoldedTree& t = *pb.tree;
  TreeStrategy s;
  s.nodes.resize(t.nodes.size());
  for (size_t n = 0; n < t.nodes.size(); ++n) {
    s.nodes[n].state = t.nodes[n].state;
    for (auto& [st, c] : t.nodes[n].children) s.nodes[n].next[st] = c;
    int gi = pb.group_of_node[n];
    if (gi < 0) continue;
    const VarGroup& g = pb.groups[gi];
    for (int ei = 0; ei < g.size(); ++ei) {
      const Rat& pe = x[g.first_var + ei];
      if (pe > 0) s.nodes[n].choice[g.labels[ei]] = pe;
    }
  }
  return s;
}

namespace {

// All ways to split `denominator` grid units across `parts` coordinates,
// lexicographically ascending.
std::vector<std::vector<long>> compositions(int parts, int denominator) {
  std::vector<std::vector<long>> out;
  std::vector<long> cur(parts, 0);
  std::function<void(int, long)> rec = [&](int idx, long left) {
    if (idx == parts - 1) {
      cur[idx] = left;
      out.push_back(cur);
      return;
    }
    for (long v = 0; v <= left; ++v) {
      cur[idx] = v;
      rec(idx + 1, left - v);
    }
  };
  if (parts > 0) rec(0, denominator);
  return out;
}

}  // namespace

SolveResult solve_brute(const PolyProblem& pb, int grid_denominator,
                        long point_cap, int var_cap) {
  SolveResult res;
  res.method = SolveResult::Method::BruteGrid;

  int free_vars = 0;
  for (auto& g : pb.groups) free_vars += g.size() - 1;
  if (free_vars > var_cap)
    throw ResourceError("grid search variable count " +
                        std::to_string(free_vars) + " exceeds the cap");

  std::vector<std::vector<std::vector<long>>> grids;
  double points = 1;
  for (auto& g : pb.groups) {
    grids.push_back(compositions(g.size(), grid_denominator));
    points *= static_cast<double>(grids.back().size());
    if (points > static_cast<double>(point_cap))
      throw ResourceError("grid search point count exceeds the cap");
  }

  // Lipschitz radii of the rounding argument: per group the grid point is
  // within L1 distance 2(m-1)/r of any simplex point (zeros preserved).
  Rat delta_p = 0;
  for (auto& g : pb.groups)
    delta_p += make_rat(2 * (g.size() - 1), grid_denominator);
  Rat delta_q = delta_p * pb.value_bound;

  // Double-precision prescreen. Marked masses are sums of products of
  // nonnegative terms, so their float image is zero exactly when the
  // rational value is; P and Q comparisons get a guard band orders of
  // magnitude above the attainable rounding error, and anything inside the
  // band is re-evaluated exactly. Points rejected by the screen provably
  // cannot improve either tracked minimum.
  const UnfoldedTree& tree = *pb.tree;
  int node_count = static_cast<int>(tree.nodes.size());
  struct NodeF {
    double p = 0, q = 0, inf = 0, bot = 0;
  };
  std::vector<NodeF> fvals(node_count);
  std::vector<double> fleaf(node_count, 0.0);
  for (int n = 0; n < node_count; ++n)
    if (tree.nodes[n].leaf() && tree.mark[n] == LeafMark::None)
      fleaf[n] = rat_double(pb.leaf_value[n]);
  std::vector<std::vector<std::vector<std::pair<int, double>>>> farcs;
  for (auto& group : pb.arcs) {
    farcs.emplace_back();
    for (auto& edge : group) {
      farcs.back().emplace_back();
      for (auto& [child, delta] : edge)
        farcs.back().back().push_back({child, rat_double(delta)});
    }
  }
  const double guard = 1e-6 * std::max(1.0, rat_double(pb.value_bound));
  const double nu2_d = pb.nu2.is_plus_infinity()
                           ? std::numeric_limits<double>::infinity()
                           : rat_double(pb.nu2.value);
  const double delta_q_d = rat_double(delta_q);

  std::vector<Rat> x(pb.var_count, Rat(1));
  std::vector<double> xd(pb.var_count, 1.0);
  std::vector<NodeEval> workspace;
  std::vector<size_t> pick(pb.groups.size(), 0);
  bool have_best = false, have_relaxed = false;
  Rat best_value, relaxed_min;
  double best_value_d = std::numeric_limits<double>::infinity();
  double relaxed_min_d = std::numeric_limits<double>::infinity();
  std::vector<Rat> best_x;

  long scanned = 0;
  while (true) {
    for (size_t gi = 0; gi < pb.groups.size(); ++gi) {
      const VarGroup& g = pb.groups[gi];
      const std::vector<long>& comp = grids[gi][pick[gi]];
      for (int ei = 0; ei < g.size(); ++ei)
        xd[g.first_var + ei] =
            static_cast<double>(comp[ei]) / grid_denominator;
    }
    ++scanned;

    for (int n = node_count - 1; n >= 0; --n) {
      NodeF& v = fvals[n];
      if (tree.nodes[n].leaf()) {
        v.p = pb.in_objective[n] ? 1.0 : 0.0;
        v.inf = tree.mark[n] == LeafMark::Infeasible ? 1.0 : 0.0;
        v.bot = tree.mark[n] == LeafMark::BottomFeasible ? 1.0 : 0.0;
        v.q = fleaf[n];
        continue;
      }
      v.p = v.q = v.inf = v.bot = 0;
      int gi = pb.group_of_node[n];
      const VarGroup& g = pb.groups[gi];
      for (int ei = 0; ei < g.size(); ++ei) {
        double pe = xd[g.first_var + ei];
        if (pe == 0) continue;
        for (auto& [child, d] : farcs[gi][ei]) {
          double w = pe * d;
          v.p += w * fvals[child].p;
          v.q += w * fvals[child].q;
          v.inf += w * fvals[child].inf;
          v.bot += w * fvals[child].bot;
        }
      }
    }
    const NodeF& rootf = fvals.empty() ? NodeF{} : fvals[0];
    bool maybe_relaxed = rootf.inf == 0;
    if (maybe_relaxed && !pb.has_bottom_leaves && !pb.nu2.is_plus_infinity())
      maybe_relaxed = rootf.bot > 0 || rootf.q < nu2_d + delta_q_d + guard;
    bool maybe_improving = !have_best || rootf.p <= best_value_d + guard ||
                           rootf.p <= relaxed_min_d + guard;

    if (maybe_relaxed && maybe_improving) {
      for (size_t gi = 0; gi < pb.groups.size(); ++gi) {
        const VarGroup& g = pb.groups[gi];
        const std::vector<long>& comp = grids[gi][pick[gi]];
        for (int ei = 0; ei < g.size(); ++ei)
          x[g.first_var + ei] = make_rat(comp[ei], grid_denominator);
      }
      eval_nodes(pb, x, workspace);
      Evaluation ev{workspace[0].p, workspace[0].q, workspace[0].inf,
                    workspace[0].bot};
      if (is_feasible(pb, ev)) {
        if (!have_best || ev.p < best_value) {
          have_best = true;
          best_value = ev.p;
          best_value_d = rat_double(best_value);
          best_x = x;
        }
      }
      // Relaxed scan for the lower bound: when bottom leaves exist the
      // constraint can always be met arbitrarily closely, so only the
      // infeasible-mass constraint survives the relaxation.
      bool relaxed_ok = ev.inf_mass == 0;
      if (relaxed_ok && !pb.has_bottom_leaves && !pb.nu2.is_plus_infinity())
        relaxed_ok = ev.bot_mass > 0 || ev.q < pb.nu2.value + delta_q;
      if (relaxed_ok && (!have_relaxed || ev.p < relaxed_min)) {
        have_relaxed = true;
        relaxed_min = ev.p;
        relaxed_min_d = rat_double(relaxed_min);
      }
    }

    size_t gi = 0;
    while (gi < pb.groups.size()) {
      if (++pick[gi] < grids[gi].size()) break;
      pick[gi] = 0;
      ++gi;
    }
    if (gi == pb.groups.size()) break;
    if (pb.groups.empty()) break;
  }

  if (have_relaxed) {
    res.lower = relaxed_min - delta_p;
    if (res.lower < 0) res.lower = 0;
    res.lower_certified = true;
  }
  if (have_best) {
    res.feasible = true;
    res.value = best_value;
    res.witness_vars = best_x;
    res.witness = witness_to_strategy(pb, best_x);
    if (res.lower > res.value) res.lower = res.value;
  }
  return res;
}

namespace {

void project_simplex(std::vector<double>& v) {
  // Euclidean projection onto the probability simplex.
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0, theta = 0;
  int rho = -1;
  for (size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0) {
      rho = static_cast<int>(i);
      theta = t;
    }
  }
  if (rho < 0) {
    double uniform = 1.0 / v.size();
    for (auto& e : v) e = uniform;
    return;
  }
  for (auto& e : v) e = std::max(0.0, e - theta);
}

void project_all(const PolyProblem& pb, std::vector<double>& x) {
  for (auto& g : pb.groups) {
    std::vector<double> block(x.begin() + g.first_var,
                              x.begin() + g.first_var + g.size());
    project_simplex(block);
    std::copy(block.begin(), block.end(), x.begin() + g.first_var);
  }
}

// Snap to rationals with the given denominator, preserving zeros and
// renormalizing each simplex block exactly.
std::vector<Rat> snap_to_grid(const PolyProblem& pb,
                              const std::vector<double>& x, long denom) {
  std::vector<Rat> out(pb.var_count, Rat(0));
  for (auto& g : pb.groups) {
    std::vector<long> units(g.size(), 0);
    long total = 0;
    for (int ei = 0; ei < g.size(); ++ei) {
      double v = x[g.first_var + ei];
      long u = v <= 0 ? 0 : std::lround(v * static_cast<double>(denom));
      units[ei] = u;
      total += u;
    }
    if (total == 0) {
      units[0] = denom;
      total = denom;
    }
    // Fix the rounding drift on the largest positive entry.
    long drift = denom - total;
    int target = 0;
    for (int ei = 0; ei < g.size(); ++ei)
      if (units[ei] > units[target]) target = ei;
    units[target] += drift;
    if (units[target] < 0) {
      // Degenerate drift; fall back to a Dirac on the largest input.
      std::fill(units.begin(), units.end(), 0L);
      units[target] = denom;
    }
    for (int ei = 0; ei < g.size(); ++ei)
      out[g.first_var + ei] = make_rat(units[ei], denom);
  }
  return out;
}

}  // namespace

SolveResult solve_gradient(const PolyProblem& pb, int restarts, double tol,
                           std::uint64_t seed) {
  SolveResult res;
  res.method = SolveResult::Method::Gradient;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double nu2f = pb.nu2.is_plus_infinity()
                    ? std::numeric_limits<double>::infinity()
                    : rat_double(pb.nu2.value);

  bool have_best = false;
  Rat best_value;
  std::vector<Rat> best_x;

  auto try_accept = [&](const std::vector<double>& xf) {
    // Corner and small-grid snaps recover exact optima whenever the
    // descent has homed in on one; fine snaps keep interior candidates.
    for (long denom : {1L, 2L, 4L, 16L, 1L << 12, 1L << 18, 1L << 24}) {
      std::vector<double> cleaned = xf;
      for (auto& v : cleaned)
        if (v < 1e-9) v = 0;
      std::vector<Rat> xr = snap_to_grid(pb, cleaned, denom);
      Evaluation ev = evaluate(pb, xr);
      if (!is_feasible(pb, ev)) continue;
      if (!have_best || ev.p < best_value) {
        have_best = true;
        best_value = ev.p;
        best_x = xr;
      }
    }
  };

  int passes = pb.has_bottom_leaves ? 2 : 1;
  for (int pass = 0; pass < passes; ++pass) {
    bool bottom_pass = pass == 1;
    for (int restart = 0; restart < std::max(restarts, 1); ++restart) {
      std::vector<double> x(pb.var_count);
      for (auto& g : pb.groups) {
        double sum = 0;
        for (int ei = 0; ei < g.size(); ++ei) {
          double v = -std::log(std::max(unif(rng), 1e-12));
          x[g.first_var + ei] = v;
          sum += v;
        }
        for (int ei = 0; ei < g.size(); ++ei) x[g.first_var + ei] /= sum;
      }

      double slack = 0.1;
      double lambda = 10;
      for (int rung = 0; rung < 8; ++rung) {
        double step = 0.5;
        for (int iter = 0; iter < 250; ++iter) {
          EvaluationF ev = evaluate_f(pb, x, true);
          double violation =
              std::isinf(nu2f) ? 0.0 : std::max(0.0, ev.q - (nu2f - slack));
          std::vector<double> grad(pb.var_count, 0);
          for (int v = 0; v < pb.var_count; ++v) {
            grad[v] = ev.grad_p[v];
            if (violation > 0) grad[v] += 2 * lambda * violation * ev.grad_q[v];
            grad[v] += 2 * lambda * ev.inf_mass * ev.grad_inf[v];
            if (bottom_pass) {
              double want = std::max(0.0, 1e-4 - ev.bot_mass);
              grad[v] -= 2 * lambda * want * ev.grad_bot[v];
            }
          }
          double norm = 0;
          for (double gv : grad) norm += gv * gv;
          if (std::sqrt(norm) < tol) break;
          std::vector<double> next(pb.var_count);
          for (int v = 0; v < pb.var_count; ++v)
            next[v] = x[v] - step * grad[v];
          project_all(pb, next);
          x = next;
          step = std::max(step * 0.98, 1e-4);
        }
        slack *= 0.5;
        lambda *= 3;
      }
      try_accept(x);
    }
  }

  if (have_best) {
    res.feasible = true;
    res.value = best_value;
    res.witness_vars = best_x;
    res.witness = witness_to_strategy(pb, best_x);
    res.lower = 0;
    res.lower_certified = false;
  }
  return res;
}

Rat backward_induction_min(const PolyProblem& pb) {
  const UnfoldedTree& t = *pb.tree;
  const WeightedMdp& mdp = *t.mdp;
  int count = static_cast<int>(t.nodes.size());
  std::vector<Rat> v(count, Rat(0));
  for (int n = count - 1; n >= 0; --n) {
    const TreeNode& node = t.nodes[n];
    if (node.leaf()) {
      v[n] = pb.in_objective[n] ? 1 : 0;
      continue;
    }
    bool first = true;
    Rat best = 0;
    for (const Edge* e : mdp.edges_from(node.state)) {
      Rat q = 0;
      for (auto& [target, delta] : e->dist.entries)
        q += delta * v[node.children.at(target)];
      if (first || q < best) {
        best = q;
        first = false;
      }
    }
    v[n] = best;
  }
  return v[0];
}

AssembleResult assemble_sigma_n_k(const WeightedMdp& mdp, long horizon,
                                  const TreeStrategy& witness, const Rat& nu2,
                                  const MemorylessStrategy& extension,
                                  const AttractorResult& attractor,
                                  long k_cap, int weight_index) {
  AssembleResult out;

  // Expectation of the tree witness extended forever by `extension`.
  CompositeStrategy forever;
  forever.head = witness;
  forever.mid = extension;
  forever.switch_step = horizon;
  forever.tail = extension;
  ExtValue e_sigma = expectation_ts(mdp, forever, weight_index);

  CompositeStrategy probe;
  probe.head = witness;
  probe.mid = extension;
  probe.tail = attractor.strategy;

  if (e_sigma.is_finite()) {
    Rat eta = nu2 - e_sigma.value;
    if (eta <= 0)
      throw NotStrictlyFeasibleError(
          "witness expectation does not clear the bound strictly");
    out.eta = eta;
    Rat miss_bound = eta / (2 * attractor.bound);
    Rat half = eta / 2;

    PhaseStepper st(mdp, forever, weight_index);
    for (long j = 0; j < horizon; ++j) st.step();
    long k = horizon;
    while (true) {
      Rat gap = e_sigma.value - st.expected_acc();
      if (gap < 0) gap = -gap;
      if (gap < half && st.live_mass() < miss_bound) break;
      if (k >= k_cap)
        throw ResourceError("switch-step search exceeded the cap");
      st.step();
      ++k;
    }
    out.k = k;
    probe.switch_step = k;
    ExtValue total = expectation_ts(mdp, probe, weight_index);
    if (!total.is_finite() || total.value >= nu2)
      throw std::runtime_error("assembled witness failed the exact bound");
    out.expectation = total.value;
    out.strategy = probe;
    return out;
  }

  // Pumping extension: the expectation under the extension alone is not
  // finite (mass parked in a negative-mean component); lengthen the middle
  // phase until the exact expectation with the attractor tail clears nu2.
  long k = std::max<long>(horizon, 1);
  while (true) {
    probe.switch_step = k;
    ExtValue total = expectation_ts(mdp, probe, weight_index);
    if (total.is_finite() && total.value < nu2) {
      out.k = k;
      out.eta = nu2 - total.value;
      out.expectation = total.value;
      out.strategy = probe;
      return out;
    }
    if (k >= k_cap) throw ResourceError("switch-step search exceeded the cap");
    k *= 2;
  }
}

}  // namespace cartomdp
