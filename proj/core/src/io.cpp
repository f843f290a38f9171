#include "cartomdp/io.hpp"

#include <json.hpp>

#include <algorithm>

namespace cartomdp {

using nlohmann::json;

namespace {

Rat parse_rat_or_throw(const json& j, const std::string& where) {
  if (!j.is_string() && !j.is_number_integer())
    throw ParseError("field '" + where + "': expected a rational string");
  std::string s = j.is_string() ? j.get<std::string>()
                                : std::to_string(j.get<long>());
  auto r = rat_parse(s);
  if (!r)
    throw ParseError("field '" + where + "': cannot parse rational '" + s +
                     "'");
  return *r;
}

const json& require(const json& j, const char* field) {
  if (!j.contains(field))
    throw ParseError(std::string("missing field '") + field + "'");
  return j.at(field);
}

std::vector<Rat> parse_weight_list(const json& j, int k,
                                   const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != k)
    throw ParseError("field '" + where + "': expected a list of " +
                     std::to_string(k) + " rationals");
  std::vector<Rat> out;
  for (auto& v : j) out.push_back(parse_rat_or_throw(v, where));
  return out;
}

}  // namespace

WeightedMdp parse_mdp(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("syntax error: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("top level must be a record");

  WeightedMdp m;
  for (auto& s : require(j, "states")) {
    if (!s.is_string()) throw ParseError("field 'states': expected names");
    m.states.push_back(s.get<std::string>());
  }

  auto lookup = [&](const json& v, const std::string& where) -> StateId {
    if (!v.is_string())
      throw ParseError("field '" + where + "': expected a state name");
    auto id = m.state_id(v.get<std::string>());
    if (!id)
      throw ParseError("field '" + where + "': unknown state '" +
                       v.get<std::string>() + "'");
    return *id;
  };

  m.initial = lookup(require(j, "initial"), "initial");
  m.goal = lookup(require(j, "goal"), "goal");

  for (auto& w : require(j, "weights")) {
    if (!w.is_string()) throw ParseError("field 'weights': expected names");
    m.weight_names.push_back(w.get<std::string>());
  }
  int k = m.k();

  for (auto& ej : require(j, "edges")) {
    Edge e;
    e.source = lookup(require(ej, "source"), "edges.source");
    e.label = require(ej, "label").get<std::string>();
    std::string where = m.states[e.source] + "." + e.label;
    const json& dist = require(ej, "distribution");
    if (!dist.is_object())
      throw ParseError("field 'distribution' of edge " + where +
                       ": expected a map");
    for (auto it = dist.begin(); it != dist.end(); ++it) {
      StateId t = lookup(json(it.key()), "distribution target");
      e.dist.entries[t] = parse_rat_or_throw(it.value(), where);
    }

    const json& wj = require(ej, "weights");
    if (wj.is_array()) {
      auto ws = parse_weight_list(wj, k, where);
      for (auto& [t, p] : e.dist.entries) {
        auto existing = m.weights.find({e.source, t});
        if (existing != m.weights.end() && existing->second != ws)
          throw ParseError("conflicting weights for pair (" +
                           m.states[e.source] + "," + m.states[t] + ")");
        m.weights[{e.source, t}] = ws;
      }
    } else if (wj.is_object()) {
      for (auto it = wj.begin(); it != wj.end(); ++it) {
        StateId t = lookup(json(it.key()), "weights target");
        auto ws = parse_weight_list(it.value(), k, where);
        auto existing = m.weights.find({e.source, t});
        if (existing != m.weights.end() && existing->second != ws)
          throw ParseError("conflicting weights for pair (" +
                           m.states[e.source] + "," + m.states[t] + ")");
        m.weights[{e.source, t}] = ws;
      }
    } else {
      throw ParseError("field 'weights' of edge " + where +
                       ": expected a list or a map");
    }
    m.edges.push_back(std::move(e));
  }

  return m;
}

SuggestedQuery parse_suggested_query(const std::string& text) {
  SuggestedQuery q;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    return q;
  }
  if (!j.is_object() || !j.contains("suggested_query")) return q;
  const json& s = j.at("suggested_query");
  if (s.contains("nu1")) q.nu1 = parse_rat_or_throw(s.at("nu1"), "nu1");
  if (s.contains("nu2")) q.nu2 = parse_rat_or_throw(s.at("nu2"), "nu2");
  return q;
}

namespace {

json mdp_to_json(const WeightedMdp& m) {
  json j;
  j["states"] = m.states;
  j["initial"] = m.states[m.initial];
  j["goal"] = m.states[m.goal];
  j["weights"] = m.weight_names;

  std::vector<const Edge*> sorted;
  for (auto& e : m.edges) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](const Edge* a, const Edge* b) {
    return std::tie(a->source, a->label) < std::tie(b->source, b->label);
  });

  j["edges"] = json::array();
  for (const Edge* e : sorted) {
    json ej;
    ej["source"] = m.states[e->source];
    ej["label"] = e->label;
    json dist = json::object();
    for (auto& [t, p] : e->dist.entries) dist[m.states[t]] = rat_str(p);
    ej["distribution"] = dist;

    // Canonical form: a shared list when all targets agree, a map otherwise.
    bool uniform = true;
    const std::vector<Rat>* first = nullptr;
    for (auto& [t, p] : e->dist.entries) {
      auto it = m.weights.find({e->source, t});
      const std::vector<Rat>* ws = it == m.weights.end() ? nullptr
                                                         : &it->second;
      if (!ws) continue;
      if (!first)
        first = ws;
      else if (*first != *ws)
        uniform = false;
    }
    if (uniform && first) {
      json ws = json::array();
      for (auto& w : *first) ws.push_back(rat_str(w));
      ej["weights"] = ws;
    } else {
      json wm = json::object();
      for (auto& [t, p] : e->dist.entries) {
        auto it = m.weights.find({e->source, t});
        if (it == m.weights.end()) continue;
        json ws = json::array();
        for (auto& w : it->second) ws.push_back(rat_str(w));
        wm[m.states[t]] = ws;
      }
      ej["weights"] = wm;
    }
    j["edges"].push_back(ej);
  }
  return j;
}

}  // namespace

std::string serialize_mdp(const WeightedMdp& m) {
  return mdp_to_json(m).dump(2) + "\n";
}

std::string serialize_mdp_with_query(const WeightedMdp& m, const Rat& nu1,
                                     const Rat& nu2) {
  json j = mdp_to_json(m);
  j["suggested_query"] = {{"nu1", rat_str(nu1)}, {"nu2", rat_str(nu2)}};
  return j.dump(2) + "\n";
}

namespace {

void tree_rows(const WeightedMdp& mdp, const TreeStrategy& s, int node,
               const std::string& key, json& rows) {
  if (!s.nodes[node].choice.empty()) {
    json row;
    row["history"] = key;
    json ch = json::object();
    for (auto& [label, p] : s.nodes[node].choice) ch[label] = rat_str(p);
    row["choice"] = ch;
    rows.push_back(row);
  }
  for (auto& [st, child] : s.nodes[node].next) {
    // The label component of the step is recovered from the choice map:
    // a child is keyed by its state; all labels reaching it are equivalent
    // histories only when the edge is unique, so we key by state name.
    std::string next_key =
        key.empty() ? mdp.states[st] : key + ">" + mdp.states[st];
    tree_rows(mdp, s, child, next_key, rows);
  }
}

json memoryless_to_json(const WeightedMdp& mdp, const MemorylessStrategy& s) {
  json t = json::object();
  for (auto& [st, ch] : s.choice) {
    json row = json::object();
    for (auto& [label, p] : ch) row[label] = rat_str(p);
    t[mdp.states[st]] = row;
  }
  return t;
}

}  // namespace

std::string serialize_tree_strategy(const WeightedMdp& mdp,
                                    const TreeStrategy& s) {
  json j;
  j["kind"] = "tree";
  json rows = json::array();
  if (!s.nodes.empty())
    tree_rows(mdp, s, 0, mdp.states[mdp.initial], rows);
  j["nodes"] = rows;
  return j.dump(2) + "\n";
}

std::string serialize_composite_strategy(const WeightedMdp& mdp,
                                         const CompositeStrategy& s) {
  json j;
  j["kind"] = "composite";
  json rows = json::array();
  if (!s.head.nodes.empty())
    tree_rows(mdp, s.head, 0, mdp.states[mdp.initial], rows);
  j["head"] = rows;
  j["k"] = s.switch_step;
  j["mid"] = memoryless_to_json(mdp, s.mid);
  j["tail"] = memoryless_to_json(mdp, s.tail);
  return j.dump(2) + "\n";
}

}  // namespace cartomdp
