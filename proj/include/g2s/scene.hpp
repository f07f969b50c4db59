#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "g2s/documents.hpp"
#include "g2s/geometry.hpp"
#include "g2s/shapecodec.hpp"

namespace g2s {

struct SceneObject {
  int id = 0;
  int category_id = 0;
  OrientedBox box;
  std::optional<ShapeCode> shape_code;
  PointCloud points;  // world frame; may be empty
  bool operator==(const SceneObject&) const = default;
};

/// Objects aligned one-to-one (and in order) with the nodes of a scene graph.
struct Scene {
  std::vector<SceneObject> objects;
  bool operator==(const Scene&) const = default;
};

/// Throws g2s::Error unless the scene's ids and categories follow the graph's nodes.
void check_alignment(const Scene& s, const SceneGraph& g);

/// Deterministic stratified subset of at most `cap` points (all when cap is 0).
PointCloud downsample(const PointCloud& pc, std::size_t cap);

Json scene_to_json(const Scene& s, const Vocabulary& v, std::size_t point_cap = 0);
Scene scene_from_json(const Json& j, const Vocabulary& v, const std::string& path = "");
std::string write_scene(const Scene& s, const Vocabulary& v, std::size_t point_cap = 0);
Scene read_scene(std::string_view json, const Vocabulary& v);

/// Decode the object's shape code and place the canonical cloud in its box.
PointCloud object_points(const SceneObject& o, const SuperquadricCodec& codec, std::size_t n_points);

}  // namespace g2s
