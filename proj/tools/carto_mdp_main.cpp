#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "cartomdp/cartography.hpp"
#include "cartomdp/evgen.hpp"
#include "cartomdp/io.hpp"
#include "cartomdp/problem_zero.hpp"
#include "cartomdp/semantics.hpp"
#include "cartomdp/unfold.hpp"

using namespace cartomdp;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitAssumption = 2;
constexpr int kExitResource = 3;

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

Rat parse_rat_flag(const std::string& text, const std::string& flag) {
  auto r = rat_parse(text);
  if (!r) throw ParseError("flag " + flag + ": cannot parse rational '" +
                           text + "'");
  return *r;
}

struct LoadedModel {
  WeightedMdp mdp;
  SuggestedQuery query;
};

LoadedModel load_model(const std::string& path) {
  std::string text = read_input(path);
  LoadedModel out;
  out.mdp = parse_mdp(text);
  out.query = parse_suggested_query(text);
  auto violations = validate(out.mdp);
  if (!violations.empty()) {
    json j = json::array();
    for (auto& v : violations)
      j.push_back({{"rule", v.rule}, {"where", v.where}, {"message", v.message}});
    throw ParseError("model fails validation: " + j.dump());
  }
  return out;
}

Rat require_threshold(const std::optional<std::string>& flag_value,
                      const std::optional<Rat>& suggested,
                      const std::string& flag) {
  if (flag_value) return parse_rat_flag(*flag_value, flag);
  if (suggested) return *suggested;
  throw ParseError("missing " + flag + " (no suggested_query in the model)");
}

std::string ext_json(const ExtValue& v) { return ext_str(v); }

int cmd_validate(const std::string& file) {
  std::string text = read_input(file);
  WeightedMdp mdp = parse_mdp(text);
  auto violations = validate(mdp);
  json j;
  j["violations"] = json::array();
  for (auto& v : violations)
    j["violations"].push_back(
        {{"rule", v.rule}, {"where", v.where}, {"message", v.message}});
  j["ok"] = violations.empty();
  std::cout << j.dump(2) << "\n";
  return violations.empty() ? 0 : kExitUsage;
}

int cmd_ssp(const std::string& file, int weight, const std::string& from) {
  LoadedModel lm = load_model(file);
  if (weight < 1 || weight > lm.mdp.k())
    throw ParseError("--weight out of range");
  SspResult res = ssp_all(lm.mdp, weight - 1);
  json j;
  j["weight"] = lm.mdp.weight_names[weight - 1];
  json values = json::object();
  for (StateId s = 0; s < lm.mdp.n_states(); ++s)
    values[lm.mdp.states[s]] = ext_json(res.values[s]);
  j["values"] = values;
  if (!from.empty()) {
    auto id = lm.mdp.state_id(from);
    if (!id) throw ParseError("unknown state: " + from);
    j["from"] = from;
    j["value"] = ext_json(res.values[*id]);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_assumptions(const std::string& file,
                    const std::optional<std::string>& nu1,
                    const std::optional<std::string>& nu2) {
  LoadedModel lm = load_model(file);
  json j;
  for (int i = 0; i < lm.mdp.k() && i < 2; ++i) {
    CycleReport rep = cycle_report(lm.mdp, i);
    json r;
    r["has_cycle"] = rep.has_cycle;
    r["all_positive"] = rep.all_positive;
    r["all_nonnegative"] = rep.all_nonnegative;
    r["all_nonpositive"] = rep.all_nonpositive;
    if (rep.min_cycle_weight) r["min_cycle_weight"] = rat_str(*rep.min_cycle_weight);
    if (rep.min_cycle_mean) r["min_cycle_mean"] = rat_str(*rep.min_cycle_mean);
    j["cycles"][lm.mdp.weight_names[i]] = r;
  }
  Rat v1 = require_threshold(nu1, lm.query.nu1, "--nu1");
  Rat v2 = require_threshold(nu2, lm.query.nu2, "--nu2");
  CompletenessReport comp = completeness_check(lm.mdp, v1, v2);
  switch (comp.kind) {
    case CompletenessReport::Kind::PositiveW2:
      j["completeness"] = "positive-w2-cycles";
      j["kappa"] = rat_str(*comp.kappa);
      break;
    case CompletenessReport::Kind::PositiveW1:
      j["completeness"] = "positive-w1-cycles";
      j["n0"] = comp.n0->certified;
      j["n0_formula_bound"] = comp.n0->formula;
      break;
    default:
      j["completeness"] = "none";
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_carto(const std::string& file, const std::optional<std::string>& nu1,
              const std::optional<std::string>& nu2,
              const std::vector<std::string>& epsilons, int nmax,
              const std::string& alpha, int grid, int restarts,
              std::uint64_t seed, long budget_nodes, const std::string& out) {
  LoadedModel lm = load_model(file);
  Rat v1 = require_threshold(nu1, lm.query.nu1, "--nu1");
  Rat v2 = require_threshold(nu2, lm.query.nu2, "--nu2");

  CartographyOptions opt;
  opt.n_max = nmax;
  opt.alpha = parse_rat_flag(alpha, "--alpha");
  opt.grid = grid;
  opt.restarts = restarts;
  opt.seed = seed;
  opt.node_budget = budget_nodes;
  CartographyResult carto = run_cartography(lm.mdp, v1, v2, opt);
  if (carto.budget_exhausted && carto.records.empty())
    throw ResourceError("node budget too small for any horizon");

  json j;
  j["globally_infeasible"] = carto.globally_infeasible;
  if (carto.globally_infeasible) j["reason"] = carto.infeasible_reason;
  j["budget_exhausted"] = carto.budget_exhausted;
  if (carto.bracket_lo) j["bracket_lo"] = rat_str(*carto.bracket_lo);
  if (carto.bracket_hi) j["bracket_hi"] = rat_str(*carto.bracket_hi);

  std::string csv = cartography_csv(carto);
  std::string svg = cartography_svg(carto);
  if (!out.empty()) {
    write_output(out + ".csv", csv);
    write_output(out + ".svg", svg);
    j["csv"] = out + ".csv";
    j["svg"] = out + ".svg";
  } else {
    std::cout << csv;
  }

  json verdicts = json::array();
  int widx = 0;
  for (auto& etext : epsilons) {
    Rat eps = parse_rat_flag(etext, "--epsilon");
    if (eps < 0 || eps > 1)
      throw ParseError("--epsilon must lie in [0,1]");
    EpsilonVerdict v = classify_epsilon(carto, eps, v1, v2);
    json vj;
    vj["epsilon"] = rat_str(eps);
    switch (v.kind) {
      case EpsilonVerdict::Kind::NoSolution: vj["verdict"] = "no-solution"; break;
      case EpsilonVerdict::Kind::Solution: vj["verdict"] = "solution"; break;
      default: vj["verdict"] = "unknown";
    }
    if (v.certifying_horizon >= 0) vj["horizon"] = v.certifying_horizon;
    if (v.kind == EpsilonVerdict::Kind::Solution) {
      vj["prob_phi_plus"] = rat_str(v.prob_phi_plus);
      vj["expectation"] = rat_str(v.expectation);
      vj["k"] = v.witness->k;
      if (!out.empty()) {
        std::string path = out + ".eps" + std::to_string(widx) + ".json";
        write_output(path, serialize_composite_strategy(
                               carto.safe.mdp, v.witness->strategy));
        vj["strategy"] = path;
      }
    }
    verdicts.push_back(vj);
    ++widx;
  }
  j["verdicts"] = verdicts;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_p0(const std::string& file, const std::optional<std::string>& nu1,
           const std::optional<std::string>& nu2, const std::string& out) {
  LoadedModel lm = load_model(file);
  Rat v1 = require_threshold(nu1, lm.query.nu1, "--nu1");
  Rat v2 = require_threshold(nu2, lm.query.nu2, "--nu2");
  P0Result res = decide_p0(lm.mdp, v1, v2);
  json j;
  j["verdict"] = res.yes ? "Yes" : "No";
  j["pi"] = ext_json(res.pi);
  j["product_states"] = res.product_states;
  j["sure_win"] = res.sure_win;
  if (res.yes) {
    CounterStrategy cs = counter_strategy_on_original(lm.mdp, *res.witness);
    std::string text = serialize_counter_strategy(lm.mdp, cs);
    if (!out.empty()) {
      write_output(out, text);
      j["strategy"] = out;
    } else {
      j["strategy_inline"] = json::parse(text);
    }
    j["k"] = res.witness->assembled.k;
  }
  std::cout << (res.yes ? "Yes" : "No") << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_evgen(int horizon, int levels, long capacity, long target,
              int nonflex, std::uint64_t seed, const std::string& out) {
  EvScenarioParams params;
  params.horizon = horizon;
  params.levels = levels;
  params.capacity = capacity;
  params.charge_target = target;
  params.nonflex_values = nonflex;
  params.seed = seed;
  EvScenario sc = generate_ev_scenario(params);
  std::string text = serialize_mdp_with_query(sc.mdp, sc.nu1, sc.nu2_hint);
  if (!out.empty())
    write_output(out, text);
  else
    std::cout << text;
  return 0;
}

int cmd_tree(const std::string& file, int n, bool with_hat,
             long budget_nodes) {
  LoadedModel lm = load_model(file);
  UnfoldedTree tree = unfold(lm.mdp, n, budget_nodes);
  if (with_hat) {
    SspResult ssp = ssp_all(lm.mdp, lm.mdp.k() > 1 ? 1 : 0);
    tree = hat(std::move(tree), ssp.values);
  }
  std::cout << serialize_unfolded_tree(tree);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"doubly-weighted MDP cartography and synthesis"};
  app.require_subcommand(1);

  std::string file, out, from_state, alpha = "1/10000";
  std::optional<std::string> nu1, nu2;
  std::vector<std::string> epsilons;
  int nmax = 6, grid = 16, restarts = 8, weight = 2, horizon = 4, levels = 3;
  int nonflex = 2, tree_n = 2;
  long budget_nodes = 200000, capacity = 4, target = 3;
  std::uint64_t seed = 0;
  bool with_hat = false;

  auto* validate_cmd = app.add_subcommand("validate", "check model invariants");
  validate_cmd->add_option("file", file)->required();

  auto* ssp_cmd = app.add_subcommand("ssp", "shortest-path classification");
  ssp_cmd->add_option("file", file)->required();
  ssp_cmd->add_option("--weight", weight, "1-based weight index");
  ssp_cmd->add_option("--from", from_state, "report a single state");

  auto* assume_cmd =
      app.add_subcommand("assumptions", "cycle certificates and constants");
  assume_cmd->add_option("file", file)->required();
  assume_cmd->add_option("--nu1", nu1);
  assume_cmd->add_option("--nu2", nu2);

  auto* carto_cmd =
      app.add_subcommand("carto", "bounded-horizon value sequences");
  carto_cmd->add_option("file", file)->required();
  carto_cmd->add_option("--nu1", nu1);
  carto_cmd->add_option("--nu2", nu2);
  carto_cmd->add_option("--epsilon", epsilons, "classify these thresholds");
  carto_cmd->add_option("--nmax", nmax);
  carto_cmd->add_option("--alpha", alpha);
  carto_cmd->add_option("--grid", grid);
  carto_cmd->add_option("--restarts", restarts);
  carto_cmd->add_option("--seed", seed);
  carto_cmd->add_option("--budget-nodes", budget_nodes);
  carto_cmd->add_option("--out", out, "prefix for csv/svg/strategy files");

  auto* p0_cmd = app.add_subcommand("p0", "decide the zero-threshold case");
  p0_cmd->add_option("file", file)->required();
  p0_cmd->add_option("--nu1", nu1);
  p0_cmd->add_option("--nu2", nu2);
  p0_cmd->add_option("--out", out, "witness strategy file");

  auto* ev_cmd = app.add_subcommand("evgen", "charging scenario generator");
  ev_cmd->add_option("--T", horizon);
  ev_cmd->add_option("--levels", levels);
  ev_cmd->add_option("--capacity", capacity);
  ev_cmd->add_option("--target", target);
  ev_cmd->add_option("--nonflex", nonflex);
  ev_cmd->add_option("--seed", seed);
  ev_cmd->add_option("--out", out);

  auto* tree_cmd = app.add_subcommand("tree", "debug dump of the unfolding");
  tree_cmd->add_option("file", file)->required();
  tree_cmd->add_option("--n", tree_n)->required();
  tree_cmd->add_flag("--hat", with_hat);
  tree_cmd->add_option("--budget-nodes", budget_nodes);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate_cmd)) return cmd_validate(file);
    if (app.got_subcommand(ssp_cmd)) return cmd_ssp(file, weight, from_state);
    if (app.got_subcommand(assume_cmd)) return cmd_assumptions(file, nu1, nu2);
    if (app.got_subcommand(carto_cmd))
      return cmd_carto(file, nu1, nu2, epsilons, nmax, alpha, grid, restarts,
                       seed, budget_nodes, out);
    if (app.got_subcommand(p0_cmd)) return cmd_p0(file, nu1, nu2, out);
    if (app.got_subcommand(ev_cmd))
      return cmd_evgen(horizon, levels, capacity, target, nonflex, seed, out);
    if (app.got_subcommand(tree_cmd))
      return cmd_tree(file, tree_n, with_hat, budget_nodes);
  } catch (const AssumptionError& e) {
    std::cerr << "assumption not met: " << e.what() << "\n";
    return kExitAssumption;
  } catch (const ResourceError& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
