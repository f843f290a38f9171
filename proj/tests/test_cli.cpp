#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "cartomdp/io.hpp"
#include "support/fixtures.hpp"

using namespace cartomdp;
using namespace cartomdp::testing;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  std::string cmd = std::string(CARTO_MDP_BIN) + " " + args + " 2>&1";
  std::array<char, 4096> buf;
  RunResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) res.out += buf.data();
  int status = pclose(pipe);
  res.exit_code = WEXITSTATUS(status);
  return res;
}

std::string write_fixture(const std::string& name, const std::string& text) {
  std::string path = "/tmp/cartomdp_test_" + name;
  std::ofstream out(path);
  out << text;
  return path;
}

std::string fig3_path() {
  static std::string path =
      write_fixture("fig3.mdp",
                    serialize_mdp_with_query(fig3(), Rat(1), make_rat(21, 10)));
  return path;
}

std::string fig1_path() {
  static std::string path = write_fixture("fig1.mdp", serialize_mdp(fig1()));
  return path;
}

}  // namespace

TEST_CASE("validate accepts the fixtures and rejects breakage") {
  RunResult ok = run("validate " + fig1_path());
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("\"ok\": true") != std::string::npos);

  std::string broken = serialize_mdp(fig1());
  broken.replace(broken.find("\"goal\""), 6, "\"gaol\"");
  std::string path = write_fixture("broken.mdp", broken);
  RunResult bad = run("validate " + path);
  CHECK(bad.exit_code != 0);
  CHECK(bad.out.find("goal") != std::string::npos);
}

TEST_CASE("shortest-path values are printed per state") {
  RunResult r = run("ssp " + fig1_path() + " --weight 2 --from s0");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"value\": \"-2\"") != std::string::npos);
}

TEST_CASE("assumptions report cycle signs and constants") {
  RunResult r = run("assumptions " + fig3_path());
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("positive-w2-cycles") != std::string::npos);
  CHECK(r.out.find("\"kappa\": \"21/10\"") != std::string::npos);
}

TEST_CASE("the zero-threshold verdict prints and exits cleanly") {
  RunResult r = run("p0 " + fig3_path() + " --nu1 1 --nu2 2.1");
  CHECK(r.exit_code == 0);
  CHECK(r.out.rfind("No", 0) == 0);

  // Thresholds fall back to the embedded suggested query.
  RunResult viaquery = run("p0 " + fig3_path());
  CHECK(viaquery.exit_code == 0);
  CHECK(viaquery.out.rfind("No", 0) == 0);
}

TEST_CASE("the value table is exact and deterministic") {
  std::string args = "carto " + fig3_path() +
                     " --nu1 1 --nu2 2.1 --nmax 5 --grid 2 --epsilon 0.3";
  RunResult a = run(args);
  RunResult b = run(args);
  CHECK(a.exit_code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("3,0,1/8,") != std::string::npos);
  CHECK(a.out.find("5,0,1/32,") != std::string::npos);
  CHECK(a.out.find("\"verdict\": \"solution\"") != std::string::npos);
}

TEST_CASE("artifacts are written next to the given prefix") {
  std::string args = "carto " + fig3_path() +
                     " --nu1 1 --nu2 2.1 --nmax 3 --grid 2 --epsilon 0.5 " +
                     "--out /tmp/cartomdp_out";
  RunResult r = run(args);
  CHECK(r.exit_code == 0);
  std::ifstream csv("/tmp/cartomdp_out.csv");
  REQUIRE(csv.good());
  std::string first;
  std::getline(csv, first);
  CHECK(first == "N,lower,upper,alpha,gap_bound");
  std::ifstream svg("/tmp/cartomdp_out.svg");
  REQUIRE(svg.good());
  std::ifstream strat("/tmp/cartomdp_out.eps0.json");
  REQUIRE(strat.good());
  std::string text((std::istreambuf_iterator<char>(strat)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("\"kind\": \"composite\"") != std::string::npos);
  CHECK(text.find("\"tail\"") != std::string::npos);
  CHECK(text.find("\"k\"") != std::string::npos);
}

TEST_CASE("assumption violations exit with code two") {
  MdpBuilder b;
  b.initial("s").goal("Goal");
  b.edge("s", "plus", {{"s", Rat(1)}}).weight("s", "s", 1, 0);
  b.edge("s", "minus", {{"t", Rat(1)}}).weight("s", "t", -1, 0);
  b.edge("t", "back", {{"s", Rat(1)}}).weight("t", "s", -1, 0);
  b.edge("t", "fin", {{"Goal", Rat(1)}}).weight("t", "Goal", 0, 0);
  std::string path = write_fixture("mixed.mdp", serialize_mdp(b.build()));
  RunResult r = run("p0 " + path + " --nu1 0 --nu2 5");
  CHECK(r.exit_code == 2);
}

TEST_CASE("resource exhaustion exits with code three") {
  RunResult r = run("carto " + fig3_path() +
                    " --nu1 1 --nu2 2.1 --nmax 4 --budget-nodes 2");
  CHECK(r.exit_code == 3);
  RunResult t = run("tree " + fig3_path() + " --n 40 --budget-nodes 50");
  CHECK(t.exit_code == 3);
}

TEST_CASE("the tree dump renders both variants") {
  RunResult plain = run("tree " + fig3_path() + " --n 2");
  CHECK(plain.exit_code == 0);
  CHECK(plain.out.find("\"plain\"") != std::string::npos);
  RunResult hat = run("tree " + fig3_path() + " --n 2 --hat");
  CHECK(hat.exit_code == 0);
  CHECK(hat.out.find("terminal-weighted") != std::string::npos);
}

TEST_CASE("generated scenarios are deterministic and well-formed") {
  RunResult a = run("evgen --T 3 --levels 2 --seed 7");
  RunResult b = run("evgen --T 3 --levels 2 --seed 7");
  CHECK(a.exit_code == 0);
  CHECK(a.out == b.out);
  RunResult other = run("evgen --T 3 --levels 2 --seed 8");
  CHECK(other.out != a.out);

  WeightedMdp m = parse_mdp(a.out);
  CHECK(validate(m).empty());
  CycleReport rep = cycle_report(m, 0);
  CHECK(rep.all_nonnegative);  // certification for the zero-threshold route

  std::string path = write_fixture("ev.mdp", a.out);
  RunResult v = run("validate " + path);
  CHECK(v.exit_code == 0);
}

TEST_CASE("generator output pipes straight into the decision") {
  std::string cmd = std::string(CARTO_MDP_BIN) +
                    " evgen --T 3 --levels 2 --seed 7 | " + CARTO_MDP_BIN +
                    " p0 - 2>&1";
  std::array<char, 4096> buf;
  std::string out1, out2;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) out1 += buf.data();
  int status1 = WEXITSTATUS(pclose(pipe));
  pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  while (fgets(buf.data(), buf.size(), pipe)) out2 += buf.data();
  pclose(pipe);
  CHECK(status1 == 0);
  CHECK(out1 == out2);
  bool verdict = out1.rfind("Yes", 0) == 0 || out1.rfind("No", 0) == 0;
  CHECK(verdict);
}
