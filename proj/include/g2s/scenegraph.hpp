#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace g2s {

struct ObjectNode {
  int id = 0;
  int category_id = 0;
  bool operator==(const ObjectNode&) const = default;
};

struct EdgeTriplet {
  int src = 0;
  int dst = 0;
  int predicate_id = 0;
  bool operator==(const EdgeTriplet&) const = default;
};

/// Ordered object and predicate names; indices are positions in the lists.
struct Vocabulary {
  std::string name;
  std::vector<std::string> object_names;
  std::vector<std::string> predicate_names;

  int num_objects() const { return static_cast<int>(object_names.size()); }
  int num_predicates() const { return static_cast<int>(predicate_names.size()); }
  std::optional<int> object_index(std::string_view n) const;
  std::optional<int> predicate_index(std::string_view n) const;
  /// Like predicate_index but throws g2s::Error when absent.
  int require_predicate(std::string_view n) const;
  int require_object(std::string_view n) const;

  bool operator==(const Vocabulary&) const = default;
};

/// Directed multi-relational graph. Node ids are arbitrary unique integers;
/// edges refer to ids, not positions.
struct SceneGraph {
  std::string vocab;
  std::vector<ObjectNode> nodes;
  std::vector<EdgeTriplet> edges;

  /// Position of the node with `id`, if present.
  std::optional<std::size_t> index_of(int id) const;
  /// Edge endpoints translated to node positions. Throws on dangling ids.
  std::vector<std::pair<int, int>> edge_positions() const;
  int max_id() const;

  bool operator==(const SceneGraph&) const = default;
};

struct GraphChange {
  std::vector<ObjectNode> added_nodes;
  std::vector<EdgeTriplet> added_edges;
  /// (index into the original edge list, new predicate id)
  std::vector<std::pair<std::size_t, int>> relabeled_edges;
  /// One entry per node of the changed graph (original nodes then added
  /// nodes) marking participation in a change.
  std::vector<bool> change_mask;

  bool empty() const { return added_nodes.empty() && added_edges.empty() && relabeled_edges.empty(); }
  bool operator==(const GraphChange&) const = default;
};

struct Violation {
  std::string kind;  // "self-loop", "predicate out of range", ...
  std::string where; // "node 3", "edge 0"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool has(std::string_view kind) const;
};

ValidationReport validate_graph(const SceneGraph& g, const Vocabulary& v);

/// Recompute change_mask for `c` against the original graph `g`.
std::vector<bool> compute_change_mask(const SceneGraph& g, const GraphChange& c);

/// Original nodes then added nodes; relabels applied, then added edges.
/// Throws g2s::Error naming the endpoint or edge index that does not resolve.
SceneGraph apply_change(const SceneGraph& g, const GraphChange& c);

enum class ManipulationMode { None, Relabel, Add };

std::string_view to_string(ManipulationMode m);
ManipulationMode manipulation_mode_from_string(std::string_view s);

/// Random user edit used to train and probe the manipulation network.
/// Relabel picks a uniform edge and a uniform different predicate; Add inserts
/// one node of uniform category with 1-3 edges to distinct existing nodes.
std::pair<SceneGraph, GraphChange> simulate_manipulation(const SceneGraph& g, const Vocabulary& v,
                                                         ManipulationMode mode, std::uint64_t seed);

/// Probabilities (none, relabel, add) used during training.
struct ManipulationMixture {
  double none = 0.5;
  double relabel = 0.25;
  double add = 0.25;
};

ManipulationMode draw_mode(const ManipulationMixture& mix, std::uint64_t seed);

// JSON documents. Categories and predicates are stored by name.
std::string write_graph(const SceneGraph& g, const Vocabulary& v);
SceneGraph read_graph(std::string_view json, const Vocabulary& v);
std::string write_vocabulary(const Vocabulary& v);
Vocabulary read_vocabulary(std::string_view json, std::string name = {});
std::string write_change(const GraphChange& c, const Vocabulary& v);
/// Parses a change document and derives change_mask against `base`.
GraphChange read_change(std::string_view json, const SceneGraph& base, const Vocabulary& v);

}  // namespace g2s
