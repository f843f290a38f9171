#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cartomdp/rat.hpp"

namespace cartomdp {

using StateId = int;

// Raised when a construction would exceed a configured node/size budget.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when an operation's cycle-shape precondition is not certified.
struct AssumptionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Distribution {
  // target state -> probability; entries are positive and sum to 1.
  std::map<StateId, Rat> entries;

  bool is_dirac() const {
    return entries.size() == 1 && entries.begin()->second == 1;
  }
  Rat total() const {
    Rat s = 0;
    for (auto& [t, p] : entries) s += p;
    return s;
  }
};

struct Edge {
  StateId source = -1;
  std::string label;
  Distribution dist;
};

// A k-weighted Markov decision process. States are indexed; edges carry
// string labels unique per source state; weights attach to supported
// (source, target) pairs and are shared by all edges enabling that pair.
struct WeightedMdp {
  std::vector<std::string> states;
  StateId initial = -1;
  StateId goal = -1;
  std::vector<std::string> weight_names;  // one entry per weight function
  std::vector<Edge> edges;
  std::map<std::pair<StateId, StateId>, std::vector<Rat>> weights;

  int k() const { return static_cast<int>(weight_names.size()); }
  int n_states() const { return static_cast<int>(states.size()); }
  int n_non_goal() const { return n_states() - 1; }

  std::optional<StateId> state_id(const std::string& name) const;
  std::vector<const Edge*> edges_from(StateId s) const;
  const Edge* edge(StateId s, const std::string& label) const;

  // Weight of index i on the pair (s, t); zero when the pair carries none.
  Rat weight(int i, StateId s, StateId t) const;

  bool has_weight(StateId s, StateId t) const {
    return weights.count({s, t}) > 0;
  }
};

struct Violation {
  std::string rule;
  std::string where;
  std::string message;
};

// Empty result iff every structural invariant holds: distributions are
// normalized, every state has an outgoing edge, the goal state is a sink
// whose single self-loop carries all-zero weights, supports stay in range,
// edge labels are unique per source, and every supported pair has weights.
std::vector<Violation> validate(const WeightedMdp& mdp);

using Path = std::vector<StateId>;

// Sum of w_i over the first `ell` steps of the path.
Rat accumulated_weight(const WeightedMdp& mdp, const Path& path, int i,
                       int ell);

struct TsResult {
  enum class Tag { Finite, PlusInfinity, Undetermined };
  Tag tag = Tag::Undetermined;
  Rat value = 0;
};

// Accumulated weight at the first goal visit. `known_goal_free` marks a
// prefix certified to have no goal continuation (yields +infinity); a
// finite prefix that has not reached the goal is Undetermined.
TsResult truncated_sum(const WeightedMdp& mdp, const Path& path, int i,
                       bool known_goal_free = false);

enum class PrefixClass { PhiPlus, PhiMinus, Psi };

// Exactly one of the three holds for any path of length >= N:
// PhiPlus: goal within N steps and w1-sum >= nu1 at the first visit;
// PhiMinus: goal within N steps and w1-sum < nu1; Psi: no goal visit.
PrefixClass classify_prefix(const WeightedMdp& mdp, const Path& path, int N,
                            const Rat& nu1);

struct Query {
  Rat nu1;
  Rat nu2;
  std::optional<Rat> epsilon;  // in [0,1] when present
};

// ---------------------------------------------------------------------------
// Strategies

// Distribution over edge labels enabled at the history's last state.
using EdgeChoice = std::map<std::string, Rat>;

struct Strategy {
  virtual ~Strategy() = default;
  // `history` always starts at the mdp's initial state.
  virtual EdgeChoice act(const WeightedMdp& mdp,
                         std::span<const StateId> history) const = 0;
};

struct MemorylessStrategy final : Strategy {
  std::map<StateId, EdgeChoice> choice;

  EdgeChoice act(const WeightedMdp&,
                 std::span<const StateId> history) const override {
    auto it = choice.find(history.back());
    if (it == choice.end())
      throw std::runtime_error("memoryless strategy undefined at state");
    return it->second;
  }
};

// Decisions indexed by history, stored as a trie over states. The trie is
// the image of a finite-depth unfolding: node identity, not re-hashed state
// sequences, carries the history.
struct TreeStrategy final : Strategy {
  struct Node {
    StateId state = -1;
    EdgeChoice choice;               // empty on leaves / absorbed nodes
    std::map<StateId, int> next;     // successor state -> child node
  };
  std::vector<Node> nodes;  // nodes[0] is the root (initial state)

  int depth() const;
  // Walks the trie; returns -1 once the history leaves the stored prefix.
  int resolve(std::span<const StateId> history) const;

  EdgeChoice act(const WeightedMdp&,
                 std::span<const StateId> history) const override {
    int n = resolve(history);
    if (n < 0 || nodes[n].choice.empty())
      throw std::runtime_error("tree strategy undefined on history");
    return nodes[n].choice;
  }
};

// Plays `head` while the history stays inside the trie and is shorter than
// `switch_step`, then `mid` until `switch_step`, then `tail`. The shape
// "tree for k steps, then memoryless" is the case head-depth == switch_step;
// the assembled witnesses use head-depth <= switch_step with an
// intermediate memoryless phase.
struct CompositeStrategy final : Strategy {
  TreeStrategy head;
  MemorylessStrategy mid;
  long switch_step = 0;  // k
  MemorylessStrategy tail;

  EdgeChoice act(const WeightedMdp& mdp,
                 std::span<const StateId> history) const override {
    long steps = static_cast<long>(history.size()) - 1;
    if (steps < switch_step) {
      int n = head.resolve(history);
      if (n >= 0 && !head.nodes[n].choice.empty()) return head.nodes[n].choice;
      return mid.act(mdp, history);
    }
    return tail.act(mdp, history);
  }
};

}  // namespace cartomdp
