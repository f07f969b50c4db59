#include "g2s/scene.hpp"

#include "g2s/error.hpp"

namespace g2s {

using namespace detail;

void check_alignment(const Scene& s, const SceneGraph& g) {
  if (s.objects.size() != g.nodes.size())
    throw Error("scene has " + std::to_string(s.objects.size()) + " objects for " + std::to_string(g.nodes.size()) +
                " graph nodes");
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    if (s.objects[i].id != g.nodes[i].id)
      throw Error("scene object " + std::to_string(i) + " has id " + std::to_string(s.objects[i].id) + ", graph node has " +
                  std::to_string(g.nodes[i].id));
    if (s.objects[i].category_id != g.nodes[i].category_id)
      throw Error("scene object " + std::to_string(i) + " category differs from its graph node");
  }
}

PointCloud downsample(const PointCloud& pc, std::size_t cap) {
  if (cap == 0 || pc.size() <= cap) return pc;
  PointCloud out;
  out.reserve(cap);
  for (std::size_t k = 0; k < cap; ++k) out.push_back(pc[k * pc.size() / cap]);
  return out;
}

Json scene_to_json(const Scene& s, const Vocabulary& v, std::size_t point_cap) {
  Json objs = Json::array();
  for (const auto& o : s.objects) {
    const auto& b = o.box;
    Json jo{{"id", o.id},
            {"category", v.object_names.at(static_cast<std::size_t>(o.category_id))},
            {"box", {{"w", b.w}, {"l", b.l}, {"h", b.h}, {"cx", b.cx}, {"cy", b.cy}, {"cz", b.cz}, {"alpha_deg", b.alpha}}}};
    if (o.shape_code) jo["shape_code"] = std::vector<double>(o.shape_code->begin(), o.shape_code->end());
    if (!o.points.empty()) {
      Json pts = Json::array();
      for (const auto& p : downsample(o.points, point_cap)) pts.push_back({p[0], p[1], p[2]});
      jo["points"] = std::move(pts);
    }
    objs.push_back(std::move(jo));
  }
  return Json{{"vocab", v.name}, {"objects", std::move(objs)}};
}

Scene scene_from_json(const Json& j, const Vocabulary& v, const std::string& path) {
  const auto& objs = require_key(j, "objects", path);
  if (!objs.is_array()) throw ParseError(path + "/objects", "expected an array");
  Scene s;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string p = path + "/objects/" + std::to_string(i);
    const Json& jo = objs[i];
    SceneObject o;
    o.id = require_int(require_key(jo, "id", p), p + "/id");
    const auto& cat = require_string(require_key(jo, "category", p), p + "/category");
    auto idx = v.object_index(cat);
    if (!idx) throw ParseError(p + "/category", "unknown object category '" + cat + "'");
    o.category_id = *idx;
    const Json& jb = require_key(jo, "box", p);
    const std::string pb = p + "/box";
    auto num = [&](const char* k) { return require_number(require_key(jb, k, pb), pb + "/" + k); };
    o.box = {num("w"), num("l"), num("h"), num("cx"), num("cy"), num("cz"), num("alpha_deg")};
    for (double e : {o.box.w, o.box.l, o.box.h})
      if (!(e > 0)) throw ParseError(pb, "box extents must be positive");
    if (auto it = jo.find("shape_code"); it != jo.end()) {
      if (!it->is_array() || it->size() != kShapeCodeDim)
        throw ParseError(p + "/shape_code", "expected an array of " + std::to_string(kShapeCodeDim) + " numbers");
      ShapeCode c{};
      for (std::size_t k = 0; k < kShapeCodeDim; ++k) c[k] = require_number((*it)[k], p + "/shape_code/" + std::to_string(k));
      o.shape_code = c;
    }
    if (auto it = jo.find("points"); it != jo.end()) {
      if (!it->is_array()) throw ParseError(p + "/points", "expected an array");
      for (std::size_t k = 0; k < it->size(); ++k) {
        const Json& q = (*it)[k];
        const std::string pq = p + "/points/" + std::to_string(k);
        if (!q.is_array() || q.size() != 3) throw ParseError(pq, "expected [x, y, z]");
        o.points.push_back({require_number(q[0], pq), require_number(q[1], pq), require_number(q[2], pq)});
      }
    }
    s.objects.push_back(std::move(o));
  }
  return s;
}

std::string write_scene(const Scene& s, const Vocabulary& v, std::size_t point_cap) {
  return scene_to_json(s, v, point_cap).dump(2) + "\n";
}

Scene read_scene(std::string_view json, const Vocabulary& v) { return scene_from_json(parse_json(json), v); }

PointCloud object_points(const SceneObject& o, const SuperquadricCodec& codec, std::size_t n_points) {
  if (!o.shape_code) return {};
  const PrimitiveParams p = codec.unpack(*o.shape_code);
  return place_in_box(sample_superquadric(p, n_points), {p.ax, p.ay, p.az}, o.box);
}

}  // namespace g2s
