#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "g2s/scene.hpp"

namespace g2s {

/// The rule-checkable relations.
enum class Rule { LeftOf, RightOf, FrontOf, BehindOf, HigherThan, LowerThan, SmallerThan, BiggerThan, SameAs };

std::optional<Rule> rule_for(std::string_view predicate_name);
std::string_view rule_name(Rule r);

struct RuleOptions {
  /// Compare h + cz / 2 for higher/lower instead of the box top cz + h / 2.
  bool literal_height = false;
};

bool constraint_check(Rule r, const OrientedBox& i, const OrientedBox& j, const RuleOptions& opt = {});
/// Throws g2s::Error "not rule-checkable" for predicates without a rule.
bool constraint_check(std::string_view predicate, const OrientedBox& i, const OrientedBox& j, const RuleOptions& opt = {});

struct ConstraintReport {
  std::map<std::string, double> accuracy;     // per predicate name
  std::map<std::string, std::size_t> checked; // edges per predicate
  double total = 0;                           // unweighted mean over predicates with edges
  std::size_t num_edges = 0;
};

/// Hit counts that can be accumulated over many scenes before reporting.
class ConstraintTally {
public:
  /// Check the listed edges of `g` (all edges when `edges` is empty) on the scene's boxes.
  void add(const Scene& s, const SceneGraph& g, const Vocabulary& v, const RuleOptions& opt = {},
           const std::vector<std::size_t>& edges = {});
  void add_result(const std::string& predicate, bool ok);
  ConstraintReport report() const;

private:
  std::map<std::string, std::pair<std::size_t, std::size_t>> hits_;  // predicate -> (hits, total)
};

ConstraintReport constraint_accuracy(const Scene& s, const SceneGraph& g, const Vocabulary& v, const RuleOptions& opt = {});

struct DiversityReport {
  double std_size = 0;      // meters
  double std_location = 0;  // meters
  double std_angle = 0;     // degrees, circular deviation from the circular mean
  double shape_chamfer = 0; // mean chamfer between consecutive samples
};

/// Spread over samples generated from one graph. Per node and parameter the
/// population standard deviation is taken across samples, then averaged
/// within each group over nodes and parameters.
DiversityReport diversity(const std::vector<Scene>& samples, const SuperquadricCodec& codec, std::size_t n_points = 256);

/// Whether `truth` is among the top-k scores. Ties with the truth count as hits;
/// a zero truth score never hits.
bool topk_hit(const std::vector<double>& scores, int truth, int k);
double topk_recall(const std::vector<std::vector<double>>& scores, const std::vector<int>& truth, int k);
/// Rank test for triplet (a, b, r) under products obj_i[a] * obj_j[b] * pred[r].
bool triplet_topk_hit(const std::vector<double>& obj_i, const std::vector<double>& obj_j, const std::vector<double>& pred,
                      int a, int b, int r, int k);

/// Per-node category scores and per-edge predicate scores (for the graph's edges).
struct GraphPrediction {
  std::vector<std::vector<double>> object_scores;
  std::vector<std::vector<double>> predicate_scores;
};

using GraphPredictor = std::function<GraphPrediction(const Scene&, const SceneGraph&)>;

/// Typical box extents of a category, used to guess categories from geometry.
struct SizePrior {
  double w = 1, l = 1, h = 1;
};

/// Geometric rules as a scene-graph predictor: rule-checkable predicates
/// score 1 when their rule holds ("same as" also needs equal object labels)
/// and "standing on" when the boxes touch,
/// normalized per edge; categories are scored by distance to size priors.
GraphPredictor rule_predictor(const Vocabulary& v, std::vector<SizePrior> priors, const RuleOptions& opt = {});

struct RecallReport {
  std::map<int, double> object;     // k -> recall
  std::map<int, double> predicate;  // over all edges
  std::map<int, double> predicate_geometric;  // over rule-checkable edges only
  std::map<int, double> triplet;
  std::size_t num_objects = 0, num_edges = 0, num_geometric_edges = 0;
};

/// Hit counts accumulated over scenes.
class RecallTally {
public:
  explicit RecallTally(std::vector<int> ks = {1, 3, 5}) : ks_(std::move(ks)) {}
  void add(const SceneGraph& g, const Vocabulary& v, const GraphPrediction& p);
  RecallReport report() const;

private:
  std::vector<int> ks_;
  std::map<int, std::size_t> obj_, pred_, geo_, trip_;
  std::size_t n_obj_ = 0, n_edge_ = 0, n_geo_ = 0;
};

RecallReport cycle_consistency(const SceneGraph& g, const Scene& s, const Vocabulary& v, const GraphPredictor& predictor);

Json constraint_report_to_json(const ConstraintReport& r);
Json recall_report_to_json(const RecallReport& r);
Json diversity_report_to_json(const DiversityReport& r);

}  // namespace g2s
