#pragma once

// Point clouds to canonical oriented boxes: minimum-area box, front
// disambiguation by annotation category, and support refinement against the
// supporting object (its box top, or a plane fitted to its points).

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "g2s/documents.hpp"
#include "g2s/geometry.hpp"
#include "g2s/scene.hpp"

namespace g2s {

struct PrepObject {
  int id = 0;
  int category_id = 0;
  PointCloud points;
  std::optional<int> annotation;    // 1|2|3, defaults from the category
  std::optional<int> manual_front;  // quarter turns, annotation 3 only
  std::optional<int> support;       // id of the supporting object
  bool planar_support = false;      // fit a plane to the support's points
};

struct PrepOptions {
  RansacOptions ransac;
  double neighbourhood = 0.5;  // xy radius of support points used for the plane
};

/// Annotation category used when an object does not carry one.
int default_annotation(const std::string& category);

/// Supports are processed before the objects they carry; cycles are errors.
Scene prepare_scene(const std::vector<PrepObject>& objects, const Vocabulary& v, const PrepOptions& opt = {});

/// Manifest: {"objects": [{"id", "category", "points" | "points_file", "annotation"?,
/// "manual_front"?, "support"?, "planar_support"?}]}; points_file is relative to `base`.
std::vector<PrepObject> prep_objects_from_json(const Json& j, const Vocabulary& v, const std::filesystem::path& base);

}  // namespace g2s
