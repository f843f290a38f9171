// Chrono-based micro-benchmarks for the hot paths: unfolding growth,
// grid solves, and policy iteration on counter products.

#include <chrono>
#include <cstdio>
#include <functional>

#include "cartomdp/evgen.hpp"
#include "cartomdp/optimize.hpp"
#include "cartomdp/problem_zero.hpp"
#include "support/fixtures.hpp"

using namespace cartomdp;
using namespace cartomdp::testing;

namespace {

void bench(const char* name, int iterations, const std::function<void()>& fn) {
  // One warmup, then the best of `iterations` timed runs.
  fn();
  double best = 1e100;
  for (int i = 0; i < iterations; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (secs < best) best = secs;
  }
  std::printf("%-40s %10.3f ms\n", name, best * 1000.0);
}

}  // namespace

int main() {
  WeightedMdp m3 = fig3();
  SspResult ssp = ssp_all(m3, 1);

  bench("unfold depth 8", 20, [&] { unfold(m3, 8); });
  bench("unfold depth 12", 10, [&] { unfold(m3, 12); });

  bench("grid solve, depth 6, denominator 2", 5, [&] {
    UnfoldedTree t = hat(unfold(m3, 6), ssp.values);
    PolyProblem pb = build_problem(t, Rat(1), ExtValue::finite(make_rat(21, 10)),
                                   ProblemVariant::Upper);
    solve_brute(pb, 2);
  });
  bench("grid solve, depth 4, denominator 8", 5, [&] {
    UnfoldedTree t = hat(unfold(m3, 4), ssp.values);
    PolyProblem pb = build_problem(t, Rat(1), ExtValue::finite(make_rat(21, 10)),
                                   ProblemVariant::Upper);
    solve_brute(pb, 8);
  });

  bench("descent, depth 5, 4 restarts", 3, [&] {
    UnfoldedTree t = hat(unfold(m3, 5), ssp.values);
    PolyProblem pb = build_problem(t, Rat(1), ExtValue::finite(make_rat(21, 10)),
                                   ProblemVariant::Upper);
    solve_gradient(pb, 4, 1e-9, 11);
  });

  EvScenarioParams ev;
  ev.horizon = 5;
  ev.levels = 3;
  bench("charging scenario, horizon 5", 5,
        [&] { generate_ev_scenario(ev); });

  EvScenario sc = generate_ev_scenario(ev);
  bench("zero-case decision on the scenario", 3,
        [&] { decide_p0(sc.mdp, sc.nu1, sc.nu2_hint); });

  bench("policy iteration on the counter product", 5, [&] {
    ProductMdp p = build_product(m3, Rat(1), CounterMode::NonNegativeCycles);
    SafeRestriction safe = restrict_to_sure_win(p.mdp);
    if (safe.initial_in_win) ssp_all(safe.mdp, 0);
  });

  return 0;
}
