#pragma once

#include <stdexcept>
#include <string>

#include "cartomdp/model.hpp"

namespace cartomdp {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Text format: a JSON record with fields `states` (list of names),
// `initial`, `goal`, `weights` (k names), `edges` (list of {source, label,
// distribution: map target -> rational-string, weights}). Edge weights are
// either a k-list shared by every target of the edge or a map
// target -> k-list when branches carry different weights. Rationals are
// written "p/q" or as decimal strings and parsed exactly.
// An optional `suggested_query` record carries default nu1/nu2 thresholds.
WeightedMdp parse_mdp(const std::string& text);

std::string serialize_mdp(const WeightedMdp& mdp);

// Optional thresholds embedded in a model file; empty fields when absent.
struct SuggestedQuery {
  std::optional<Rat> nu1;
  std::optional<Rat> nu2;
};
SuggestedQuery parse_suggested_query(const std::string& text);

// Attaches a suggested query to an already-serialized model.
std::string serialize_mdp_with_query(const WeightedMdp& mdp, const Rat& nu1,
                                     const Rat& nu2);

// Witness export: one row per trie node (identified by its label>state
// history) mapping edge labels to rational probabilities. Composite
// strategies add the switch step and the memoryless tables.
std::string serialize_tree_strategy(const WeightedMdp& mdp,
                                    const TreeStrategy& strategy);
std::string serialize_composite_strategy(const WeightedMdp& mdp,
                                         const CompositeStrategy& strategy);

}  // namespace cartomdp
