#include "g2s/scenegraph.hpp"

#include <algorithm>
#include <set>

#include "g2s/documents.hpp"
#include "g2s/error.hpp"
#include "g2s/rng.hpp"

namespace g2s {

std::optional<int> Vocabulary::object_index(std::string_view n) const {
  auto it = std::find(object_names.begin(), object_names.end(), n);
  if (it == object_names.end()) return std::nullopt;
  return static_cast<int>(it - object_names.begin());
}

std::optional<int> Vocabulary::predicate_index(std::string_view n) const {
  auto it = std::find(predicate_names.begin(), predicate_names.end(), n);
  if (it == predicate_names.end()) return std::nullopt;
  return static_cast<int>(it - predicate_names.begin());
}

int Vocabulary::require_predicate(std::string_view n) const {
  if (auto i = predicate_index(n)) return *i;
  throw Error("unknown predicate '" + std::string(n) + "'");
}

int Vocabulary::require_object(std::string_view n) const {
  if (auto i = object_index(n)) return *i;
  throw Error("unknown object category '" + std::string(n) + "'");
}

std::optional<std::size_t> SceneGraph::index_of(int id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].id == id) return i;
  return std::nullopt;
}

std::vector<std::pair<int, int>> SceneGraph::edge_positions() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto s = index_of(edges[e].src);
    auto d = index_of(edges[e].dst);
    if (!s) throw Error("edge " + std::to_string(e) + ": dangling endpoint src=" + std::to_string(edges[e].src));
    if (!d) throw Error("edge " + std::to_string(e) + ": dangling endpoint dst=" + std::to_string(edges[e].dst));
    out.emplace_back(static_cast<int>(*s), static_cast<int>(*d));
  }
  return out;
}

int SceneGraph::max_id() const {
  int m = -1;
  for (const auto& n : nodes) m = std::max(m, n.id);
  return m;
}

bool ValidationReport::has(std::string_view kind) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

ValidationReport validate_graph(const SceneGraph& g, const Vocabulary& v) {
  ValidationReport r;
  auto add = [&](std::string kind, std::string where, std::string msg) {
    r.violations.push_back({std::move(kind), std::move(where), std::move(msg)});
  };
  if (g.nodes.empty()) add("empty graph", "graph", "a scene graph needs at least one node");
  std::set<int> ids;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    const std::string where = "node " + std::to_string(i);
    if (!ids.insert(n.id).second) add("duplicate id", where, "node id " + std::to_string(n.id) + " is used twice");
    if (n.category_id < 0 || n.category_id >= v.num_objects())
      add("category out of range", where,
          "category " + std::to_string(n.category_id) + " outside [0, " + std::to_string(v.num_objects()) + ")");
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& t = g.edges[e];
    const std::string where = "edge " + std::to_string(e);
    if (t.src == t.dst) add("self-loop", where, "edge relates node " + std::to_string(t.src) + " to itself");
    if (!ids.count(t.src)) add("dangling endpoint", where, "src " + std::to_string(t.src) + " is not a node");
    if (!ids.count(t.dst)) add("dangling endpoint", where, "dst " + std::to_string(t.dst) + " is not a node");
    if (t.predicate_id < 0 || t.predicate_id >= v.num_predicates())
      add("predicate out of range", where,
          "predicate " + std::to_string(t.predicate_id) + " outside [0, " + std::to_string(v.num_predicates()) + ")");
  }
  return r;
}

std::vector<bool> compute_change_mask(const SceneGraph& g, const GraphChange& c) {
  const std::size_t n0 = g.nodes.size();
  std::vector<bool> mask(n0 + c.added_nodes.size(), false);
  for (std::size_t i = n0; i < mask.size(); ++i) mask[i] = true;
  auto mark = [&](int id) {
    if (auto p = g.index_of(id)) {
      mask[*p] = true;
      return;
    }
    for (std::size_t k = 0; k < c.added_nodes.size(); ++k)
      if (c.added_nodes[k].id == id) {
        mask[n0 + k] = true;
        return;
      }
    throw Error("change references dangling endpoint " + std::to_string(id));
  };
  for (const auto& e : c.added_edges) {
    mark(e.src);
    mark(e.dst);
  }
  for (const auto& [idx, pred] : c.relabeled_edges) {
    if (idx >= g.edges.size()) throw Error("relabel references edge " + std::to_string(idx) + " which does not exist");
    mark(g.edges[idx].src);
    mark(g.edges[idx].dst);
  }
  return mask;
}

SceneGraph apply_change(const SceneGraph& g, const GraphChange& c) {
  SceneGraph out = g;
  for (const auto& n : c.added_nodes) {
    if (out.index_of(n.id)) throw Error("added node id " + std::to_string(n.id) + " already exists");
    out.nodes.push_back(n);
  }
  for (const auto& [idx, pred] : c.relabeled_edges) {
    if (idx >= out.edges.size()) throw Error("relabel references edge " + std::to_string(idx) + " which does not exist");
    out.edges[idx].predicate_id = pred;
  }
  for (const auto& e : c.added_edges) {
    if (!out.index_of(e.src)) throw Error("added edge has dangling endpoint src=" + std::to_string(e.src));
    if (!out.index_of(e.dst)) throw Error("added edge has dangling endpoint dst=" + std::to_string(e.dst));
    out.edges.push_back(e);
  }
  return out;
}

std::string_view to_string(ManipulationMode m) {
  switch (m) {
    case ManipulationMode::None: return "none";
    case ManipulationMode::Relabel: return "relabel";
    case ManipulationMode::Add: return "add";
  }
  return "none";
}

ManipulationMode manipulation_mode_from_string(std::string_view s) {
  if (s == "none") return ManipulationMode::None;
  if (s == "relabel") return ManipulationMode::Relabel;
  if (s == "add") return ManipulationMode::Add;
  throw Error("unknown manipulation mode '" + std::string(s) + "'");
}

std::pair<SceneGraph, GraphChange> simulate_manipulation(const SceneGraph& g, const Vocabulary& v,
                                                         ManipulationMode mode, std::uint64_t seed) {
  Rng rng(seed);
  GraphChange c;
  switch (mode) {
    case ManipulationMode::None:
      break;
    case ManipulationMode::Relabel: {
      if (g.edges.empty()) throw Error("relabel manipulation requires at least one edge");
      if (v.num_predicates() < 2) throw Error("relabel manipulation requires at least two predicates");
      const std::size_t e = rng.below(g.edges.size());
      // Uniform over the other predicates.
      int p = static_cast<int>(rng.below(static_cast<std::uint64_t>(v.num_predicates() - 1)));
      if (p >= g.edges[e].predicate_id) ++p;
      c.relabeled_edges.emplace_back(e, p);
      break;
    }
    case ManipulationMode::Add: {
      if (v.num_objects() == 0 || v.num_predicates() == 0) throw Error("add manipulation requires a nonempty vocabulary");
      if (g.nodes.empty()) throw Error("add manipulation requires an existing node");
      ObjectNode n{g.max_id() + 1, static_cast<int>(rng.below(static_cast<std::uint64_t>(v.num_objects())))};
      c.added_nodes.push_back(n);
      const int want = rng.uniform_int(1, 3);
      std::vector<std::size_t> order(g.nodes.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      rng.shuffle(order);
      const int k = std::min<int>(want, static_cast<int>(order.size()));
      for (int i = 0; i < k; ++i) {
        const int other = g.nodes[order[static_cast<std::size_t>(i)]].id;
        const int pred = static_cast<int>(rng.below(static_cast<std::uint64_t>(v.num_predicates())));
        if (rng.below(2) == 0)
          c.added_edges.push_back({n.id, other, pred});
        else
          c.added_edges.push_back({other, n.id, pred});
      }
      break;
    }
  }
  c.change_mask = compute_change_mask(g, c);
  return {apply_change(g, c), std::move(c)};
}

ManipulationMode draw_mode(const ManipulationMixture& mix, std::uint64_t seed) {
  Rng rng(seed);
  const double total = mix.none + mix.relabel + mix.add;
  const double u = rng.uniform() * total;
  if (u < mix.none) return ManipulationMode::None;
  if (u < mix.none + mix.relabel) return ManipulationMode::Relabel;
  return ManipulationMode::Add;
}

// ---------------------------------------------------------------------------
// Documents

namespace detail {

const Json& require_key(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path.empty() ? "/" : path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path.empty() ? "/" : path, std::string("missing required key \"") + key + "\"");
  return *it;
}

int require_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<int>();
}

double require_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

const std::string& require_string(const Json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(path, "expected a string");
  return j.get_ref<const std::string&>();
}

}  // namespace detail

using namespace detail;

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
}

Json graph_to_json(const SceneGraph& g, const Vocabulary& v) {
  Json objs = Json::array();
  for (const auto& n : g.nodes) objs.push_back({{"id", n.id}, {"category", v.object_names.at(static_cast<std::size_t>(n.category_id))}});
  Json edges = Json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"predicate", v.predicate_names.at(static_cast<std::size_t>(e.predicate_id))}});
  return Json{{"vocab", g.vocab.empty() ? v.name : g.vocab}, {"objects", std::move(objs)}, {"edges", std::move(edges)}};
}

SceneGraph graph_from_json(const Json& j, const Vocabulary& v, const std::string& path) {
  SceneGraph g;
  if (!j.is_object()) throw ParseError(path.empty() ? "/" : path, "expected an object");
  if (auto it = j.find("vocab"); it != j.end()) g.vocab = require_string(*it, path + "/vocab");
  const auto& objs = require_key(j, "objects", path);
  const auto& edges = require_key(j, "edges", path);
  if (!objs.is_array()) throw ParseError(path + "/objects", "expected an array");
  if (!edges.is_array()) throw ParseError(path + "/edges", "expected an array");
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string p = path + "/objects/" + std::to_string(i);
    ObjectNode n;
    n.id = require_int(require_key(objs[i], "id", p), p + "/id");
    const auto& cat = require_string(require_key(objs[i], "category", p), p + "/category");
    auto idx = v.object_index(cat);
    if (!idx) throw ParseError(p + "/category", "unknown object category '" + cat + "'");
    n.category_id = *idx;
    g.nodes.push_back(n);
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string p = path + "/edges/" + std::to_string(i);
    EdgeTriplet e;
    e.src = require_int(require_key(edges[i], "src", p), p + "/src");
    e.dst = require_int(require_key(edges[i], "dst", p), p + "/dst");
    const auto& pred = require_string(require_key(edges[i], "predicate", p), p + "/predicate");
    auto idx = v.predicate_index(pred);
    if (!idx) throw ParseError(p + "/predicate", "unknown predicate '" + pred + "'");
    e.predicate_id = *idx;
    g.edges.push_back(e);
  }
  return g;
}

Json vocabulary_to_json(const Vocabulary& v) {
  Json j{{"objects", v.object_names}, {"predicates", v.predicate_names}};
  if (!v.name.empty()) j["name"] = v.name;
  return j;
}

Vocabulary vocabulary_from_json(const Json& j, std::string name, const std::string& path) {
  Vocabulary v;
  v.name = std::move(name);
  if (auto it = j.is_object() ? j.find("name") : j.end(); j.is_object() && it != j.end())
    v.name = require_string(*it, path + "/name");
  auto read_list = [&](const char* key, std::vector<std::string>& out) {
    const auto& arr = require_key(j, key, path);
    if (!arr.is_array()) throw ParseError(path + "/" + key, "expected an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = path + "/" + key + "/" + std::to_string(i);
      const auto& s = require_string(arr[i], p);
      if (!seen.insert(s).second) throw ParseError(p, "duplicate name '" + s + "'");
      out.push_back(s);
    }
  };
  read_list("objects", v.object_names);
  read_list("predicates", v.predicate_names);
  return v;
}

Json change_to_json(const GraphChange& c, const Vocabulary& v) {
  Json nodes = Json::array();
  for (const auto& n : c.added_nodes) nodes.push_back({{"id", n.id}, {"category", v.object_names.at(static_cast<std::size_t>(n.category_id))}});
  Json edges = Json::array();
  for (const auto& e : c.added_edges)
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"predicate", v.predicate_names.at(static_cast<std::size_t>(e.predicate_id))}});
  Json rel = Json::array();
  for (const auto& [idx, p] : c.relabeled_edges) rel.push_back({{"edge", idx}, {"predicate", v.predicate_names.at(static_cast<std::size_t>(p))}});
  return Json{{"added_nodes", std::move(nodes)}, {"added_edges", std::move(edges)}, {"relabeled_edges", std::move(rel)}};
}

GraphChange change_from_json(const Json& j, const SceneGraph& base, const Vocabulary& v, const std::string& path) {
  if (!j.is_object()) throw ParseError(path.empty() ? "/" : path, "expected an object");
  GraphChange c;
  auto list = [&](const char* key) -> const Json* {
    auto it = j.find(key);
    if (it == j.end()) return nullptr;
    if (!it->is_array()) throw ParseError(path + "/" + key, "expected an array");
    return &*it;
  };
  if (const Json* a = list("added_nodes")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::string p = path + "/added_nodes/" + std::to_string(i);
      ObjectNode n;
      n.id = require_int(require_key((*a)[i], "id", p), p + "/id");
      const auto& cat = require_string(require_key((*a)[i], "category", p), p + "/category");
      auto idx = v.object_index(cat);
      if (!idx) throw ParseError(p + "/category", "unknown object category '" + cat + "'");
      n.category_id = *idx;
      c.added_nodes.push_back(n);
    }
  }
  if (const Json* a = list("added_edges")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::string p = path + "/added_edges/" + std::to_string(i);
      EdgeTriplet e;
      e.src = require_int(require_key((*a)[i], "src", p), p + "/src");
      e.dst = require_int(require_key((*a)[i], "dst", p), p + "/dst");
      const auto& pred = require_string(require_key((*a)[i], "predicate", p), p + "/predicate");
      auto idx = v.predicate_index(pred);
      if (!idx) throw ParseError(p + "/predicate", "unknown predicate '" + pred + "'");
      e.predicate_id = *idx;
      c.added_edges.push_back(e);
    }
  }
  if (const Json* a = list("relabeled_edges")) {
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::string p = path + "/relabeled_edges/" + std::to_string(i);
      const int idx = require_int(require_key((*a)[i], "edge", p), p + "/edge");
      if (idx < 0) throw ParseError(p + "/edge", "negative edge index");
      const auto& pred = require_string(require_key((*a)[i], "predicate", p), p + "/predicate");
      auto pid = v.predicate_index(pred);
      if (!pid) throw ParseError(p + "/predicate", "unknown predicate '" + pred + "'");
      c.relabeled_edges.emplace_back(static_cast<std::size_t>(idx), *pid);
    }
  }
  c.change_mask = compute_change_mask(base, c);
  return c;
}

Json report_to_json(const ValidationReport& r) {
  Json arr = Json::array();
  for (const auto& v : r.violations) arr.push_back({{"kind", v.kind}, {"where", v.where}, {"message", v.message}});
  return Json{{"ok", r.ok()}, {"violations", std::move(arr)}};
}

std::string write_graph(const SceneGraph& g, const Vocabulary& v) { return graph_to_json(g, v).dump(2) + "\n"; }

SceneGraph read_graph(std::string_view json, const Vocabulary& v) { return graph_from_json(parse_json(json), v); }

std::string write_vocabulary(const Vocabulary& v) { return vocabulary_to_json(v).dump(2) + "\n"; }

Vocabulary read_vocabulary(std::string_view json, std::string name) {
  return vocabulary_from_json(parse_json(json), std::move(name));
}

std::string write_change(const GraphChange& c, const Vocabulary& v) { return change_to_json(c, v).dump(2) + "\n"; }

GraphChange read_change(std::string_view json, const SceneGraph& base, const Vocabulary& v) {
  return change_from_json(parse_json(json), base, v);
}

}  // namespace g2s
