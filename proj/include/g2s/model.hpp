#pragma once

// Scene-graph-conditioned variational model over boxes and shape codes.
//
// E_layout and E_shape run in parallel over the graph and their node outputs
// are fused by E_shared into one posterior per node. D_layout and D_shape
// decode a latent graph back to boxes and codes. T rewrites the latents of
// nodes touched by a graph edit. D_box and D_shape are the discriminators.

#include <cstdint>
#include <vector>

#include "g2s/gcn.hpp"
#include "g2s/scene.hpp"

namespace g2s {

inline constexpr int kAngleBins = 24;
inline constexpr double kAngleBinWidth = 360.0 / kAngleBins;

int angle_bin(double alpha_deg);
double angle_bin_center(int bin);

struct ModelConfig {
  int num_categories = 0;
  int num_predicates = 0;
  std::size_t width = kGcnWidth;
  std::size_t z_dim = 64;
  int layers = kGcnLayers;
  std::size_t code_dim = kShapeCodeDim;
  std::size_t disc_width = 512;

  std::size_t d_box_input() const { return 2 * static_cast<std::size_t>(num_categories) + static_cast<std::size_t>(num_predicates) + 14; }
  Json to_json() const;
  static ModelConfig from_json(const Json& j);
  bool operator==(const ModelConfig&) const = default;
};

struct Model {
  ModelConfig cfg;
  Vocabulary vocab;
  ad::ParameterStore gen;   // encoders, decoders, T
  ad::ParameterStore disc;  // D_box, D_shape

  Model() = default;
  Model(const Vocabulary& v, ModelConfig cfg, std::uint64_t seed);
};

/// Disjoint union of scene graphs, nodes in graph order.
struct GraphBatch {
  std::vector<int> categories;
  std::vector<int> predicates;
  GraphIndex index;
  std::vector<std::size_t> node_offset;  // first node of each graph, plus a final total
  std::vector<std::size_t> edge_offset;

  std::size_t num_nodes() const { return categories.size(); }
  std::size_t num_edges() const { return predicates.size(); }
};

GraphBatch make_batch(const std::vector<const SceneGraph*>& graphs);
GraphBatch make_batch(const SceneGraph& g);

/// (w, l, h, cx, cy, cz) rows, angle bins and codes for the scenes' objects.
struct BatchTargets {
  std::vector<double> boxes;  // N x 6
  std::vector<int> angle_bins;
  std::vector<double> codes;  // N x code_dim
};

BatchTargets make_targets(const std::vector<const Scene*>& scenes, std::size_t code_dim);

struct Posterior {
  ad::Var mu, logvar;
};

struct Decoded {
  ad::Var boxes;         // N x 6, extents through exp
  ad::Var angle_logits;  // N x 24
  ad::Var codes;         // N x code_dim
};

Posterior encode(nn::Context& cx, const ModelConfig& cfg, const GraphBatch& b, const BatchTargets& t);
Decoded decode(nn::Context& cx, const ModelConfig& cfg, const GraphBatch& b, ad::Var z);

/// Edited batch paired with its original. `source` maps each edited node to
/// its row in the original batch, or -1 for added nodes.
struct EditedBatch {
  GraphBatch batch;
  std::vector<int> source;
  std::vector<bool> mask;
};

EditedBatch make_edited_batch(const std::vector<const SceneGraph*>& originals, const std::vector<const SceneGraph*>& edited,
                              const std::vector<const GraphChange*>& changes);

/// T applied to the edit: returns latents for every edited node, equal to the
/// original latent row wherever the mask is false. `noise` is N_hat x Z and is
/// only read on masked rows.
ad::Var manipulate_latent(nn::Context& cx, const ModelConfig& cfg, const EditedBatch& eb, ad::Var z, ad::Var noise);

/// B x d_box_input() rows: onehot(o_i), onehot(o_j), onehot(r), b_i, b_j with
/// b = (w, l, h, cx, cy, cz, alpha / 360).
ad::Var d_box_logits(nn::Context& cx, const ModelConfig& cfg, ad::Var input);
struct DShapeOut {
  ad::Var logit;       // B x 1
  ad::Var cat_logits;  // B x C
};
DShapeOut d_shape_logits(nn::Context& cx, const ModelConfig& cfg, ad::Var codes);

/// Assemble D_box input rows from category/predicate ids and box rows.
ad::Var d_box_input(ad::Tape& t, const ModelConfig& cfg, const std::vector<int>& cat_i, const std::vector<int>& cat_j,
                    const std::vector<int>& pred, ad::Var box_i, ad::Var box_j);

// ---------------------------------------------------------------------------
// Single-scene inference.

struct LayoutPrediction {
  std::vector<std::array<double, 6>> boxes;  // w, l, h, cx, cy, cz
  std::vector<std::array<double, kAngleBins>> angle_logits;
  std::vector<ShapeCode> codes;  // raw decoder output
};

Posterior encode_scene_values(const Model& m, const SceneGraph& g, const Scene& s, ad::Tape& t);
/// Per-node (mu, logvar) rows.
std::pair<std::vector<double>, std::vector<double>> encode_scene(const Model& m, const SceneGraph& g, const Scene& s);
/// z = mu + exp(logvar / 2) * eps, elementwise.
std::vector<double> sample_latent(const std::vector<double>& mu, const std::vector<double>& logvar, const std::vector<double>& eps);
LayoutPrediction decode_scene(const Model& m, const std::vector<double>& z, const SceneGraph& g);

struct GenerateOptions {
  bool zero_latent = false;     // z = 0 instead of a prior sample
  std::size_t n_points = 1024;  // decoded points per object, 0 for none
};

Scene generate(const Model& m, const SceneGraph& g, std::uint64_t seed, const GenerateOptions& opt = {});

/// Latents of the edited graph: posterior means for existing nodes, T outputs on masked ones.
std::vector<double> manipulate_latent_values(const Model& m, const SceneGraph& g, const Scene& s, const GraphChange& c,
                                             std::uint64_t seed);
/// Unmasked objects are copied from `s`; masked and added ones are decoded.
Scene manipulate_scene(const Model& m, const SceneGraph& g, const Scene& s, const GraphChange& c, std::uint64_t seed,
                       const GenerateOptions& opt = {});

/// Eval-mode discriminator probabilities for one tuple.
double d_box_forward(const Model& m, int o_i, int o_j, int r, const std::array<double, 7>& b_i, const std::array<double, 7>& b_j);
std::pair<double, std::vector<double>> d_shape_forward(const Model& m, const ShapeCode& code);

/// Box row (w, l, h, cx, cy, cz) plus angle to an OrientedBox.
OrientedBox to_box(const std::array<double, 6>& row, double alpha_deg);

}  // namespace g2s
