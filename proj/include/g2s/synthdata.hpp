#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "g2s/eval.hpp"
#include "g2s/rng.hpp"

namespace g2s {

/// floor, table, desk, chair, sofa, bed, cabinet, shelf, lamp, pillow, box, plant
/// with the nine rule-checkable predicates plus "standing on".
Vocabulary synthetic_vocabulary();
/// Mean extents per category of synthetic_vocabulary(); the floor entry is the default room.
std::vector<SizePrior> synthetic_size_priors();

struct SynthConfig {
  std::size_t num_scenes = 100;
  int min_objects = 3;  // including the floor
  int max_objects = 8;
  double room_extent = 5.0;  // meters, square room centered at the origin
  int max_edges_per_node = 4;
  double stack_probability = 0.5;
  std::uint64_t seed = 0;

  Json to_json() const;
  static SynthConfig from_json(const Json& j);
};

struct Sample {
  SceneGraph graph;
  Scene scene;
};

/// One scene; `seed` alone determines the result.
Sample synth_scene(const SynthConfig& cfg, std::uint64_t seed);

/// Rule-consistent edges for a scene. Support edges (child, support position)
/// are always emitted as "standing on"; every other emitted edge is drawn
/// from the rules that hold for its ordered pair ("same as" only between
/// objects of one category). Nodes listed in `excluded`
/// take part only in support edges.
std::vector<EdgeTriplet> derive_predicates(const Scene& s, const Vocabulary& v, int max_edges_per_node,
                                           const std::vector<std::optional<std::size_t>>& support,
                                           const std::vector<bool>& excluded, Rng& rng);

/// Scene i is synthesized from derive_seed(cfg.seed, i).
std::vector<Sample> make_scenes(const SynthConfig& cfg);

std::string config_hash(const SynthConfig& cfg);

/// Writes vocab.json, manifest.json and train/ and val/ (90/10) graph and scene documents.
void make_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);
/// Reads one split ("train" or "val") written by make_dataset, in file order.
std::vector<Sample> load_split(const std::filesystem::path& dir, const std::string& split, const Vocabulary& v);
Vocabulary load_dataset_vocabulary(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& bytes);

}  // namespace g2s
