#include "g2s/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "g2s/error.hpp"

namespace g2s {

namespace {

constexpr std::pair<std::string_view, Rule> kRules[] = {
    {"left of", Rule::LeftOf},         {"right of", Rule::RightOf},         {"front of", Rule::FrontOf},
    {"behind of", Rule::BehindOf},     {"higher than", Rule::HigherThan},   {"lower than", Rule::LowerThan},
    {"smaller than", Rule::SmallerThan}, {"bigger than", Rule::BiggerThan}, {"same as", Rule::SameAs},
};

constexpr double kTouchTolerance = 0.05;

double height_key(const OrientedBox& b, const RuleOptions& opt) { return opt.literal_height ? b.h + b.cz / 2 : b.top(); }

bool point_in_footprint(const OrientedBox& b, double x, double y) {
  const double a = b.alpha * std::numbers::pi / 180.0;
  const double dx = x - b.cx, dy = y - b.cy;
  const double lx = std::cos(a) * dx + std::sin(a) * dy;
  const double ly = -std::sin(a) * dx + std::cos(a) * dy;
  return std::abs(lx) <= b.w / 2 && std::abs(ly) <= b.l / 2;
}

bool standing_on(const OrientedBox& i, const OrientedBox& j) {
  return std::abs(i.bottom() - j.top()) < kTouchTolerance && point_in_footprint(j, i.cx, i.cy) && i.top() > j.top();
}

}  // namespace

std::optional<Rule> rule_for(std::string_view name) {
  for (const auto& [n, r] : kRules)
    if (n == name) return r;
  return std::nullopt;
}

std::string_view rule_name(Rule r) {
  for (const auto& [n, rr] : kRules)
    if (rr == r) return n;
  return "";
}

bool constraint_check(Rule r, const OrientedBox& i, const OrientedBox& j, const RuleOptions& opt) {
  switch (r) {
    case Rule::LeftOf: return i.cx < j.cx && box_iou(i, j) < 0.5;
    case Rule::RightOf: return i.cx > j.cx && box_iou(i, j) < 0.5;
    case Rule::FrontOf: return i.cy < j.cy && box_iou(i, j) < 0.5;
    case Rule::BehindOf: return i.cy > j.cy && box_iou(i, j) < 0.5;
    case Rule::HigherThan: return height_key(i, opt) > height_key(j, opt);
    case Rule::LowerThan: return height_key(i, opt) < height_key(j, opt);
    case Rule::SmallerThan: return i.volume() < j.volume();
    case Rule::BiggerThan: return i.volume() > j.volume();
    case Rule::SameAs: return box_iou(i, j, true) > 0.5;
  }
  return false;
}

bool constraint_check(std::string_view predicate, const OrientedBox& i, const OrientedBox& j, const RuleOptions& opt) {
  auto r = rule_for(predicate);
  if (!r) throw Error("predicate '" + std::string(predicate) + "' is not rule-checkable");
  return constraint_check(*r, i, j, opt);
}

void ConstraintTally::add_result(const std::string& predicate, bool ok) {
  auto& [hit, total] = hits_[predicate];
  hit += ok ? 1 : 0;
  ++total;
}

void ConstraintTally::add(const Scene& s, const SceneGraph& g, const Vocabulary& v, const RuleOptions& opt,
                          const std::vector<std::size_t>& edges) {
  check_alignment(s, g);
  const auto pos = g.edge_positions();
  auto visit = [&](std::size_t e) {
    if (e >= g.edges.size()) throw Error("constraint tally: edge " + std::to_string(e) + " does not exist");
    const std::string& name = v.predicate_names.at(static_cast<std::size_t>(g.edges[e].predicate_id));
    auto r = rule_for(name);
    if (!r) return;
    const auto& bi = s.objects[static_cast<std::size_t>(pos[e].first)].box;
    const auto& bj = s.objects[static_cast<std::size_t>(pos[e].second)].box;
    add_result(name, constraint_check(*r, bi, bj, opt));
  };
  if (edges.empty())
    for (std::size_t e = 0; e < g.edges.size(); ++e) visit(e);
  else
    for (std::size_t e : edges) visit(e);
}

ConstraintReport ConstraintTally::report() const {
  ConstraintReport r;
  double sum = 0;
  for (const auto& [name, ht] : hits_) {
    const auto [hit, total] = ht;
    if (total == 0) continue;
    const double acc = static_cast<double>(hit) / static_cast<double>(total);
    r.accuracy[name] = acc;
    r.checked[name] = total;
    r.num_edges += total;
    sum += acc;
  }
  r.total = r.accuracy.empty() ? 0.0 : sum / static_cast<double>(r.accuracy.size());
  return r;
}

ConstraintReport constraint_accuracy(const Scene& s, const SceneGraph& g, const Vocabulary& v, const RuleOptions& opt) {
  ConstraintTally t;
  t.add(s, g, v, opt);
  return t.report();
}

// ---------------------------------------------------------------------------

namespace {

double population_std(const std::vector<double>& x) {
  if (x.size() < 2) return 0.0;
  // Shifted by the first sample so identical values give exactly zero.
  double m = 0;
  for (double v : x) m += v - x[0];
  m /= static_cast<double>(x.size());
  double s = 0;
  for (double v : x) s += (v - x[0] - m) * (v - x[0] - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

double wrap180(double d) {
  d = std::fmod(d + 180.0, 360.0);
  if (d < 0) d += 360.0;
  return d - 180.0;
}

double circular_std_deg(const std::vector<double>& deg) {
  if (deg.size() < 2) return 0.0;
  double sx = 0, sy = 0;
  for (double a : deg) {
    sx += std::cos(a * std::numbers::pi / 180.0);
    sy += std::sin(a * std::numbers::pi / 180.0);
  }
  const double mean = (sx == 0 && sy == 0) ? deg[0] : std::atan2(sy, sx) * 180.0 / std::numbers::pi;
  double s = 0;
  for (double a : deg) {
    const double d = wrap180(a - mean);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(deg.size()));
}

}  // namespace

DiversityReport diversity(const std::vector<Scene>& samples, const SuperquadricCodec& codec, std::size_t n_points) {
  DiversityReport r;
  if (samples.size() < 2) return r;
  const std::size_t n = samples[0].objects.size();
  for (const auto& s : samples)
    if (s.objects.size() != n) throw Error("diversity: samples have different object counts");
  if (n == 0) return r;
  double size = 0, loc = 0, ang = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> p[7];
    for (const auto& s : samples) {
      const auto& b = s.objects[i].box;
      const double vals[7] = {b.w, b.l, b.h, b.cx, b.cy, b.cz, b.alpha};
      for (int k = 0; k < 7; ++k) p[k].push_back(vals[k]);
    }
    for (int k = 0; k < 3; ++k) size += population_std(p[k]);
    for (int k = 3; k < 6; ++k) loc += population_std(p[k]);
    ang += circular_std_deg(p[6]);
  }
  r.std_size = size / static_cast<double>(3 * n);
  r.std_location = loc / static_cast<double>(3 * n);
  r.std_angle = ang / static_cast<double>(n);

  double ch = 0;
  std::size_t pairs = 0;
  for (std::size_t t = 1; t < samples.size(); ++t)
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = samples[t - 1].objects[i].shape_code;
      const auto& b = samples[t].objects[i].shape_code;
      if (!a || !b) continue;
      ch += chamfer(codec.decode(*a, n_points), codec.decode(*b, n_points));
      ++pairs;
    }
  r.shape_chamfer = pairs ? ch / static_cast<double>(pairs) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------

bool topk_hit(const std::vector<double>& scores, int truth, int k) {
  if (k < 1) throw Error("top-k recall needs k >= 1");
  if (truth < 0 || static_cast<std::size_t>(truth) >= scores.size()) throw Error("top-k recall: truth label out of range");
  const double st = scores[static_cast<std::size_t>(truth)];
  if (!(st > 0)) return false;
  int greater = 0;
  for (double s : scores)
    if (s > st) ++greater;
  return greater < k;
}

double topk_recall(const std::vector<std::vector<double>>& scores, const std::vector<int>& truth, int k) {
  if (k < 1) throw Error("top-k recall needs k >= 1");
  if (scores.size() != truth.size()) throw Error("top-k recall: score and truth counts differ");
  if (scores.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) hits += topk_hit(scores[i], truth[i], k) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

bool triplet_topk_hit(const std::vector<double>& oi, const std::vector<double>& oj, const std::vector<double>& pr, int a,
                      int b, int r, int k) {
  if (k < 1) throw Error("top-k recall needs k >= 1");
  const double st = oi.at(static_cast<std::size_t>(a)) * oj.at(static_cast<std::size_t>(b)) * pr.at(static_cast<std::size_t>(r));
  if (!(st > 0)) return false;
  std::size_t greater = 0;
  for (double x : oi)
    for (double y : oj)
      for (double z : pr)
        if (x * y * z > st && ++greater >= static_cast<std::size_t>(k)) return false;
  return true;
}

GraphPredictor rule_predictor(const Vocabulary& v, std::vector<SizePrior> priors, const RuleOptions& opt) {
  if (priors.size() != static_cast<std::size_t>(v.num_objects()))
    throw Error("rule predictor: " + std::to_string(priors.size()) + " size priors for " + std::to_string(v.num_objects()) +
                " categories");
  const auto standing = v.predicate_index("standing on");
  const auto same = v.predicate_index("same as");
  std::vector<std::optional<Rule>> rules;
  for (const auto& n : v.predicate_names) rules.push_back(rule_for(n));
  return [v, priors = std::move(priors), standing, same, rules, opt](const Scene& s, const SceneGraph& g) {
    check_alignment(s, g);
    GraphPrediction p;
    for (const auto& o : s.objects) {
      std::vector<double> sc(priors.size());
      double z = 0;
      for (std::size_t c = 0; c < priors.size(); ++c) {
        // Footprint extents are compared order-free since w and l swap under quarter turns.
        const double lo = std::min(o.box.w, o.box.l), hi = std::max(o.box.w, o.box.l);
        const double plo = std::min(priors[c].w, priors[c].l), phi = std::max(priors[c].w, priors[c].l);
        const double d = std::pow(std::log(lo / plo), 2) + std::pow(std::log(hi / phi), 2) + std::pow(std::log(o.box.h / priors[c].h), 2);
        sc[c] = std::exp(-d / 0.05);
        z += sc[c];
      }
      for (double& x : sc) x = z > 0 ? x / z : 0.0;
      p.object_scores.push_back(std::move(sc));
    }
    const auto pos = g.edge_positions();
    for (const auto& [i, j] : pos) {
      const auto& bi = s.objects[static_cast<std::size_t>(i)].box;
      const auto& bj = s.objects[static_cast<std::size_t>(j)].box;
      std::vector<double> sc(rules.size(), 0.0);
      double z = 0;
      for (std::size_t r = 0; r < rules.size(); ++r) {
        bool ok = false;
        if (standing && static_cast<int>(r) == *standing)
          ok = standing_on(bi, bj);
        else if (rules[r])
          ok = constraint_check(*rules[r], bi, bj, opt) &&
               !(same && static_cast<int>(r) == *same &&
                 s.objects[static_cast<std::size_t>(i)].category_id != s.objects[static_cast<std::size_t>(j)].category_id);
        sc[r] = ok ? 1.0 : 0.0;
        z += sc[r];
      }
      if (z > 0)
        for (double& x : sc) x /= z;
      p.predicate_scores.push_back(std::move(sc));
    }
    return p;
  };
}

void RecallTally::add(const SceneGraph& g, const Vocabulary& v, const GraphPrediction& p) {
  if (p.object_scores.size() != g.nodes.size() || p.predicate_scores.size() != g.edges.size())
    throw Error("recall: prediction does not cover the graph");
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    ++n_obj_;
    for (int k : ks_) obj_[k] += topk_hit(p.object_scores[i], g.nodes[i].category_id, k) ? 1 : 0;
  }
  const auto pos = g.edge_positions();
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& t = g.edges[e];
    const bool geometric = rule_for(v.predicate_names.at(static_cast<std::size_t>(t.predicate_id))).has_value();
    ++n_edge_;
    if (geometric) ++n_geo_;
    const auto& oi = p.object_scores[static_cast<std::size_t>(pos[e].first)];
    const auto& oj = p.object_scores[static_cast<std::size_t>(pos[e].second)];
    const int ci = g.nodes[static_cast<std::size_t>(pos[e].first)].category_id;
    const int cj = g.nodes[static_cast<std::size_t>(pos[e].second)].category_id;
    for (int k : ks_) {
      const bool hit = topk_hit(p.predicate_scores[e], t.predicate_id, k);
      pred_[k] += hit ? 1 : 0;
      if (geometric) geo_[k] += hit ? 1 : 0;
      trip_[k] += triplet_topk_hit(oi, oj, p.predicate_scores[e], ci, cj, t.predicate_id, k) ? 1 : 0;
    }
  }
}

RecallReport RecallTally::report() const {
  RecallReport r;
  r.num_objects = n_obj_;
  r.num_edges = n_edge_;
  r.num_geometric_edges = n_geo_;
  auto frac = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  for (int k : ks_) {
    r.object[k] = frac(obj_.count(k) ? obj_.at(k) : 0, n_obj_);
    r.predicate[k] = frac(pred_.count(k) ? pred_.at(k) : 0, n_edge_);
    r.predicate_geometric[k] = frac(geo_.count(k) ? geo_.at(k) : 0, n_geo_);
    r.triplet[k] = frac(trip_.count(k) ? trip_.at(k) : 0, n_edge_);
  }
  return r;
}

RecallReport cycle_consistency(const SceneGraph& g, const Scene& s, const Vocabulary& v, const GraphPredictor& predictor) {
  RecallTally t;
  t.add(g, v, predictor(s, g));
  return t.report();
}

Json constraint_report_to_json(const ConstraintReport& r) {
  Json per = Json::object();
  for (const auto& [k, a] : r.accuracy) per[k] = {{"accuracy", a}, {"edges", r.checked.at(k)}};
  return Json{{"total", r.total}, {"edges", r.num_edges}, {"per_predicate", std::move(per)}};
}

Json recall_report_to_json(const RecallReport& r) {
  auto m = [](const std::map<int, double>& x) {
    Json j = Json::object();
    for (const auto& [k, v] : x) j["top" + std::to_string(k)] = v;
    return j;
  };
  return Json{{"object", m(r.object)},
              {"predicate", m(r.predicate)},
              {"predicate_geometric", m(r.predicate_geometric)},
              {"triplet", m(r.triplet)},
              {"objects", r.num_objects},
              {"edges", r.num_edges},
              {"geometric_edges", r.num_geometric_edges}};
}

Json diversity_report_to_json(const DiversityReport& r) {
  return Json{{"std_size", r.std_size}, {"std_location", r.std_location}, {"std_angle", r.std_angle}, {"shape_chamfer", r.shape_chamfer}};
}

}  // namespace g2s
