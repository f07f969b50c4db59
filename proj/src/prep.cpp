#include "g2s/prep.hpp"

#include <map>
#include <set>

#include "g2s/error.hpp"
#include "g2s/synthdata.hpp"

namespace g2s {

int default_annotation(const std::string& category) {
  static const std::map<std::string, int> table{{"floor", 1}, {"table", 1}, {"desk", 1},    {"box", 1},
                                                {"plant", 1}, {"cabinet", 2}, {"shelf", 2}, {"lamp", 2},
                                                {"pillow", 2}, {"chair", 3}, {"sofa", 3},   {"bed", 3}};
  auto it = table.find(category);
  return it == table.end() ? 1 : it->second;
}

namespace {

double support_height(const OrientedBox& child, bool planar, const PrepObject& sup, const OrientedBox& sup_box,
                      const PrepOptions& opt) {
  if (!planar) return sup_box.top();
  PointCloud near;
  const double r2 = opt.neighbourhood * opt.neighbourhood;
  for (const Vec3& p : sup.points) {
    const double dx = p[0] - child.cx, dy = p[1] - child.cy;
    // Upper half only, so an underside or base is never taken for the support surface.
    if (dx * dx + dy * dy <= r2 && p[2] >= sup_box.cz) near.push_back(p);
  }
  if (near.size() < 3) return sup_box.top();
  const Plane pl = ransac_plane(near, opt.ransac);
  if (std::abs(pl.normal[2]) < 1e-6) return sup_box.top();
  return pl.height_at(child.cx, child.cy);
}

}  // namespace

Scene prepare_scene(const std::vector<PrepObject>& objects, const Vocabulary& v, const PrepOptions& opt) {
  std::map<int, std::size_t> by_id;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (!by_id.emplace(objects[i].id, i).second) throw Error("prep: duplicate object id " + std::to_string(objects[i].id));
    if (objects[i].category_id < 0 || objects[i].category_id >= v.num_objects())
      throw Error("prep: object " + std::to_string(objects[i].id) + " has an unknown category");
  }
  for (const PrepObject& o : objects)
    if (o.support && !by_id.count(*o.support))
      throw Error("prep: object " + std::to_string(o.id) + " refers to missing support " + std::to_string(*o.support));

  std::vector<std::optional<OrientedBox>> boxes(objects.size());
  std::set<std::size_t> active;
  std::function<const OrientedBox&(std::size_t)> solve = [&](std::size_t i) -> const OrientedBox& {
    if (boxes[i]) return *boxes[i];
    if (!active.insert(i).second) throw Error("prep: support cycle through object " + std::to_string(objects[i].id));
    const PrepObject& o = objects[i];
    if (o.points.empty()) throw Error("prep: object " + std::to_string(o.id) + " has no points");
    const int ann = o.annotation ? *o.annotation : default_annotation(v.object_names[static_cast<std::size_t>(o.category_id)]);
    OrientedBox b = canonical_front(min_area_obb(o.points).box, o.points, ann, o.manual_front);
    if (o.support) {
      const std::size_t s = by_id.at(*o.support);
      const OrientedBox& sb = solve(s);
      b = refine_support(b, support_height(b, o.planar_support, objects[s], sb, opt));
    }
    active.erase(i);
    boxes[i] = b;
    return *boxes[i];
  };

  Scene scene;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    SceneObject so;
    so.id = objects[i].id;
    so.category_id = objects[i].category_id;
    so.box = solve(i);
    so.points = objects[i].points;
    scene.objects.push_back(std::move(so));
  }
  return scene;
}

std::vector<PrepObject> prep_objects_from_json(const Json& j, const Vocabulary& v, const std::filesystem::path& base) {
  using namespace detail;
  std::vector<PrepObject> out;
  const Json& objs = require_key(j, "objects", "");
  if (!objs.is_array()) throw ParseError("/objects", "expected an array");
  for (std::size_t k = 0; k < objs.size(); ++k) {
    const std::string path = "/objects/" + std::to_string(k);
    const Json& o = objs[k];
    PrepObject p;
    p.id = require_int(require_key(o, "id", path), path + "/id");
    const std::string& cat = require_string(require_key(o, "category", path), path + "/category");
    auto ci = v.object_index(cat);
    if (!ci) throw ParseError(path + "/category", "unknown category '" + cat + "'");
    p.category_id = *ci;
    if (o.contains("points")) {
      p.points = read_pointcloud_json(o["points"].dump());
    } else if (o.contains("points_file")) {
      p.points = read_pointcloud(read_file(base / require_string(o["points_file"], path + "/points_file")));
    } else {
      throw ParseError(path, "missing 'points' or 'points_file'");
    }
    if (o.contains("annotation")) {
      p.annotation = require_int(o["annotation"], path + "/annotation");
      if (*p.annotation < 1 || *p.annotation > 3) throw ParseError(path + "/annotation", "must be 1, 2 or 3");
    }
    if (o.contains("manual_front")) p.manual_front = require_int(o["manual_front"], path + "/manual_front");
    if (o.contains("support") && !o["support"].is_null()) p.support = require_int(o["support"], path + "/support");
    if (o.contains("planar_support")) {
      if (!o["planar_support"].is_boolean()) throw ParseError(path + "/planar_support", "expected a boolean");
      p.planar_support = o["planar_support"].get<bool>();
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace g2s
