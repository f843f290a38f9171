#include "cartomdp/cartography.hpp"

#include <algorithm>
#include <sstream>

#include "cartomdp/semantics.hpp"

namespace cartomdp {

CompletenessReport completeness_check(const WeightedMdp& mdp, const Rat& nu1,
                                      const Rat& nu2) {
  CompletenessReport rep;
  CycleReport w2 = cycle_report(mdp, 1);
  if (w2.all_positive) {
    rep.kind = CompletenessReport::Kind::PositiveW2;
    rep.kappa = compute_kappa(mdp, nu2);
    return rep;
  }
  CycleReport w1 = cycle_report(mdp, 0);
  if (w1.all_positive) {
    rep.kind = CompletenessReport::Kind::PositiveW1;
    rep.n0 = compute_n0(mdp, nu1);
    return rep;
  }
  rep.kind = CompletenessReport::Kind::NoneApplicable;
  return rep;
}

CartographyResult run_cartography(const WeightedMdp& mdp, const Rat& nu1,
                                  const Rat& nu2,
                                  const CartographyOptions& options) {
  CartographyResult out;
  out.requested_alpha = options.alpha;

  out.safe = restrict_to_sure_win(mdp);
  if (!out.safe.initial_in_win) {
    out.globally_infeasible = true;
    out.infeasible_reason =
        "the initial state cannot reach the goal on all outcomes";
    return out;
  }
  const WeightedMdp& safe = out.safe.mdp;

  SspResult ssp = ssp_all(safe, 1);
  out.ssp_safe = ssp.values;
  ExtValue nu2v = ExtValue::finite(nu2);
  if (!(ssp.values[safe.initial] < nu2v)) {
    out.globally_infeasible = true;
    out.infeasible_reason =
        "no strategy keeps the expected truncated sum below the bound";
    return out;
  }

  out.extension = extension_policy(safe, ssp, 1);
  out.attractor = attractor_strategy(safe, 1);
  out.completeness = completeness_check(safe, nu1, nu2);

  long n_prime = safe.n_non_goal();
  for (int N = 1; N <= options.n_max; ++N) {
    CartographyRecord rec;
    rec.horizon = N;
    UnfoldedTree tree;
    try {
      tree = unfold(safe, N, options.node_budget);
    } catch (const ResourceError&) {
      out.budget_exhausted = true;
      break;
    }
    UnfoldedTree hat_tree = hat(std::move(tree), ssp.values);

    bool solved = true;
    for (ProblemVariant variant :
         {ProblemVariant::Lower, ProblemVariant::Upper}) {
      PolyProblem pb = build_problem(hat_tree, nu1, nu2v, variant);
      SolveResult sol;
      bool brute_ok = true;
      try {
        sol = solve_brute(pb, options.grid, options.point_cap,
                          options.var_cap);
      } catch (const ResourceError&) {
        brute_ok = false;
      }
      if (!brute_ok) {
        if (!options.gradient_fallback) {
          solved = false;
          break;
        }
        sol = solve_gradient(pb, options.restarts, options.grad_tol,
                             options.seed + static_cast<std::uint64_t>(N));
      }
      (variant == ProblemVariant::Lower ? rec.lower : rec.upper) = sol;
    }
    if (!solved) {
      out.budget_exhausted = true;
      break;
    }

    if (out.completeness.kind == CompletenessReport::Kind::PositiveW2 &&
        N > n_prime && n_prime > 0) {
      rec.gap_bound =
          *out.completeness.kappa * Rat(n_prime) / Rat(N - n_prime);
    }
    if (out.completeness.kind == CompletenessReport::Kind::PositiveW1)
      rec.stationary_at = out.completeness.n0->certified;
    out.records.push_back(std::move(rec));
  }

  for (auto& rec : out.records) {
    if (rec.lower.lower_certified) {
      if (!out.bracket_lo || rec.lower.lower > *out.bracket_lo)
        out.bracket_lo = rec.lower.lower;
    }
    if (rec.upper.feasible) {
      if (!out.bracket_hi || rec.upper.value < *out.bracket_hi)
        out.bracket_hi = rec.upper.value;
    }
  }
  return out;
}

EpsilonVerdict classify_epsilon(const CartographyResult& carto,
                                const Rat& epsilon, const Rat& nu1,
                                const Rat& nu2) {
  EpsilonVerdict v;
  v.epsilon = epsilon;

  if (carto.globally_infeasible) {
    v.kind = EpsilonVerdict::Kind::NoSolution;
    return v;
  }

  // Below a certified lower bound: no strategy fits.
  for (auto& rec : carto.records) {
    if (rec.lower.lower_certified && epsilon < rec.lower.lower) {
      v.kind = EpsilonVerdict::Kind::NoSolution;
      v.certifying_horizon = rec.horizon;
      return v;
    }
  }

  // Above a witnessed upper value: assemble and verify a solution.
  const CartographyRecord* best = nullptr;
  for (auto& rec : carto.records) {
    if (!rec.upper.feasible) continue;
    if (epsilon > rec.upper.value &&
        (!best || rec.upper.value < best->upper.value))
      best = &rec;
  }
  if (best) {
    const WeightedMdp& safe = carto.safe.mdp;
    try {
      AssembleResult asm_res =
          assemble_sigma_n_k(safe, best->horizon, best->upper.witness, nu2,
                             carto.extension, *carto.attractor);
      EventSpec phi_plus{EventSpec::Kind::PhiPlusN, best->horizon, nu1};
      Rat p_plus = probability(safe, asm_res.strategy, phi_plus);
      bool cond2 = p_plus >= Rat(1) - epsilon;
      bool cond3 = asm_res.expectation < nu2;
      if (cond2 && cond3) {
        v.kind = EpsilonVerdict::Kind::Solution;
        v.certifying_horizon = best->horizon;
        v.prob_phi_plus = p_plus;
        v.expectation = asm_res.expectation;
        v.witness = std::move(asm_res);
        v.verified = true;
        return v;
      }
    } catch (const std::exception&) {
      // fall through to Unknown: no exactly verified witness, no verdict
    }
  }

  v.kind = EpsilonVerdict::Kind::Unknown;
  return v;
}

std::string cartography_csv(const CartographyResult& carto) {
  std::ostringstream os;
  os << "N,lower,upper,alpha,gap_bound\n";
  for (auto& rec : carto.records) {
    bool certified = rec.lower.feasible && rec.lower.lower_certified &&
                     rec.upper.feasible && rec.upper.lower_certified;
    Rat alpha = 0;
    if (certified) alpha = std::max(rec.lower.alpha(), rec.upper.alpha());
    os << rec.horizon << ",";
    os << (rec.lower.feasible ? rat_str(rec.lower.value) : "") << ",";
    os << (rec.upper.feasible ? rat_str(rec.upper.value) : "") << ",";
    os << (certified ? rat_str(alpha) : "") << ",";
    os << (rec.gap_bound ? rat_str(*rec.gap_bound) : "") << "\n";
  }
  return os.str();
}

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

std::string cartography_svg(const CartographyResult& carto) {
  const double width = 640, row = 24, left = 80, scale = width - left - 20;
  int rows = static_cast<int>(carto.records.size()) + 1;
  double height = row * (rows + 1);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\">\n";
  auto band = [&](int r, double lo, double hi, const char* color) {
    if (hi <= lo) return;
    os << "  <rect x=\"" << fmt(left + lo * scale) << "\" y=\""
       << fmt(r * row + 4) << "\" width=\"" << fmt((hi - lo) * scale)
       << "\" height=\"" << fmt(row - 8) << "\" fill=\"" << color
       << "\"/>\n";
  };
  auto label = [&](int r, const std::string& text) {
    os << "  <text x=\"4\" y=\"" << fmt(r * row + row / 2 + 4)
       << "\" font-size=\"11\">" << text << "</text>\n";
  };
  int r = 0;
  for (auto& rec : carto.records) {
    label(r, "N=" + std::to_string(rec.horizon));
    band(r, 0, 1, "#f4f4f4");
    double lo = rec.lower.lower_certified ? rat_double(rec.lower.lower) : 0.0;
    double hi = rec.upper.feasible ? rat_double(rec.upper.value) : 1.0;
    band(r, 0, lo, "#d64545");
    band(r, hi, 1, "#3f9c4f");
    ++r;
  }
  label(r, "bracket");
  band(r, 0, 1, "#f4f4f4");
  double lo = carto.bracket_lo ? rat_double(*carto.bracket_lo) : 0.0;
  double hi = carto.bracket_hi ? rat_double(*carto.bracket_hi) : 1.0;
  band(r, 0, lo, "#d64545");
  band(r, hi, 1, "#3f9c4f");
  band(r, lo, hi, "#ffffff");
  os << "</svg>\n";
  return os.str();
}

}  // namespace cartomdp
