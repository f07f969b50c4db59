#include "g2s/model.hpp"

#include <algorithm>
#include <cmath>

#include "g2s/error.hpp"
#include "g2s/rng.hpp"

namespace g2s {

using ad::Var;

int angle_bin(double alpha_deg) {
  const int k = static_cast<int>(std::floor(normalize_degrees(alpha_deg) / kAngleBinWidth));
  return std::clamp(k, 0, kAngleBins - 1);
}

double angle_bin_center(int bin) { return kAngleBinWidth * bin + kAngleBinWidth / 2; }

Json ModelConfig::to_json() const {
  return Json{{"num_categories", num_categories}, {"num_predicates", num_predicates}, {"width", width},
              {"z_dim", z_dim}, {"layers", layers}, {"angle_bins", kAngleBins}, {"code_dim", code_dim},
              {"disc_width", disc_width}};
}

ModelConfig ModelConfig::from_json(const Json& j) {
  ModelConfig c;
  try {
    c.num_categories = j.at("num_categories").get<int>();
    c.num_predicates = j.at("num_predicates").get<int>();
    c.width = j.at("width").get<std::size_t>();
    c.z_dim = j.at("z_dim").get<std::size_t>();
    c.layers = j.at("layers").get<int>();
    c.code_dim = j.at("code_dim").get<std::size_t>();
    c.disc_width = j.at("disc_width").get<std::size_t>();
    if (j.at("angle_bins").get<int>() != kAngleBins) throw Error("model config: unsupported angle bin count");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("/hyperparams", e.what());
  }
  return c;
}

namespace {

std::size_t cat_width(const ModelConfig& c) { return c.width / 2; }
std::size_t box_width(const ModelConfig& c) { return 3 * c.width / 8; }
std::size_t angle_width(const ModelConfig& c) { return c.width - cat_width(c) - box_width(c); }
std::size_t dec_cat_width(const ModelConfig& c) { return c.width - c.z_dim; }
constexpr std::size_t kManCatWidth = 32;

void check_config(const ModelConfig& c) {
  if (c.num_categories < 1 || c.num_predicates < 1) throw Error("model config: empty vocabulary");
  if (c.z_dim == 0 || c.z_dim >= c.width) throw Error("model config: latent width must be in (0, width)");
  if (c.width < 8 || c.layers < 1 || c.code_dim == 0 || c.disc_width == 0) throw Error("model config: invalid layer sizes");
}

}  // namespace

Model::Model(const Vocabulary& v, ModelConfig c, std::uint64_t seed) : cfg(c), vocab(v) {
  if (cfg.num_categories == 0) cfg.num_categories = v.num_objects();
  if (cfg.num_predicates == 0) cfg.num_predicates = v.num_predicates();
  check_config(cfg);
  if (cfg.num_categories != v.num_objects() || cfg.num_predicates != v.num_predicates())
    throw Error("model config does not match the vocabulary sizes");
  Rng rng(seed);
  const std::size_t C = static_cast<std::size_t>(cfg.num_categories), P = static_cast<std::size_t>(cfg.num_predicates);
  const std::size_t W = cfg.width, Z = cfg.z_dim;

  nn::init_embedding(gen, "enc/layout/cat", C, cat_width(cfg), rng);
  nn::init_linear(gen, "enc/layout/box", 6, box_width(cfg), rng);
  nn::init_embedding(gen, "enc/layout/angle", kAngleBins, angle_width(cfg), rng);
  nn::init_embedding(gen, "enc/layout/pred", P, W, rng);
  init_gcn_stack(gen, "enc/layout/gcn", W, cfg.layers, rng);
  nn::init_embedding(gen, "enc/shape/cat", C, W / 2, rng);
  nn::init_linear(gen, "enc/shape/code", cfg.code_dim, W - W / 2, rng);
  nn::init_embedding(gen, "enc/shape/pred", P, W, rng);
  init_gcn_stack(gen, "enc/shape/gcn", W, cfg.layers, rng);
  nn::init_linear(gen, "enc/shared/in", 2 * W, W, rng);
  nn::init_embedding(gen, "enc/shared/pred", P, W, rng);
  init_gcn_stack(gen, "enc/shared/gcn", W, cfg.layers, rng);
  nn::init_mlp2(gen, "enc/post", W, W, 2 * Z, rng, 0.1);

  nn::init_embedding(gen, "dec/layout/cat", C, dec_cat_width(cfg), rng);
  nn::init_embedding(gen, "dec/layout/pred", P, W, rng);
  init_gcn_stack(gen, "dec/layout/gcn", W, cfg.layers, rng);
  nn::init_mlp2(gen, "dec/layout/box", W, W, 6, rng);
  nn::init_mlp2(gen, "dec/layout/angle", W, W, kAngleBins, rng);
  nn::init_embedding(gen, "dec/shape/cat", C, dec_cat_width(cfg), rng);
  nn::init_embedding(gen, "dec/shape/pred", P, W, rng);
  init_gcn_stack(gen, "dec/shape/gcn", W, cfg.layers, rng);
  nn::init_mlp2(gen, "dec/shape/head", W, W, cfg.code_dim, rng);

  nn::init_embedding(gen, "man/cat", C, kManCatWidth, rng);
  nn::init_linear(gen, "man/in", 2 * Z + kManCatWidth, W, rng);
  nn::init_embedding(gen, "man/pred", P, W, rng);
  init_gcn_stack(gen, "man/gcn", W, cfg.layers, rng);
  nn::init_mlp2(gen, "man/out", W, W, Z, rng);

  const std::size_t D = cfg.disc_width;
  nn::init_linear(disc, "dbox/0", cfg.d_box_input(), D, rng);
  nn::init_batch_norm(disc, "dbox/bn0", D);
  nn::init_linear(disc, "dbox/1", D, D, rng);
  nn::init_batch_norm(disc, "dbox/bn1", D);
  nn::init_linear(disc, "dbox/out", D, 1, rng);
  nn::init_linear(disc, "dshape/0", cfg.code_dim, D, rng);
  nn::init_batch_norm(disc, "dshape/bn0", D);
  nn::init_linear(disc, "dshape/1", D, D, rng);
  nn::init_batch_norm(disc, "dshape/bn1", D);
  nn::init_linear(disc, "dshape/prob", D, 1, rng);
  nn::init_linear(disc, "dshape/cls", D, C, rng);
}

GraphBatch make_batch(const std::vector<const SceneGraph*>& graphs) {
  GraphBatch b;
  std::vector<std::pair<int, int>> pairs;
  for (const SceneGraph* g : graphs) {
    const int off = static_cast<int>(b.categories.size());
    b.node_offset.push_back(b.categories.size());
    b.edge_offset.push_back(b.predicates.size());
    for (const auto& n : g->nodes) b.categories.push_back(n.category_id);
    const auto pos = g->edge_positions();
    for (std::size_t e = 0; e < pos.size(); ++e) {
      pairs.emplace_back(pos[e].first + off, pos[e].second + off);
      b.predicates.push_back(g->edges[e].predicate_id);
    }
  }
  b.node_offset.push_back(b.categories.size());
  b.edge_offset.push_back(b.predicates.size());
  b.index = make_graph_index(b.categories.size(), pairs);
  return b;
}

GraphBatch make_batch(const SceneGraph& g) { return make_batch(std::vector<const SceneGraph*>{&g}); }

BatchTargets make_targets(const std::vector<const Scene*>& scenes, std::size_t code_dim) {
  BatchTargets t;
  for (const Scene* s : scenes)
    for (const auto& o : s->objects) {
      const auto& b = o.box;
      for (double x : {b.w, b.l, b.h, b.cx, b.cy, b.cz}) t.boxes.push_back(x);
      t.angle_bins.push_back(angle_bin(b.alpha));
      if (!o.shape_code) throw Error("object " + std::to_string(o.id) + " has no shape code");
      if (code_dim != kShapeCodeDim) throw Error("model code width differs from the codec width");
      t.codes.insert(t.codes.end(), o.shape_code->begin(), o.shape_code->end());
    }
  return t;
}

namespace {

void check_batch(const ModelConfig& cfg, const GraphBatch& b) {
  for (int c : b.categories)
    if (c < 0 || c >= cfg.num_categories) throw Error("category " + std::to_string(c) + " outside the model vocabulary");
  for (int p : b.predicates)
    if (p < 0 || p >= cfg.num_predicates) throw Error("predicate " + std::to_string(p) + " outside the model vocabulary");
}

GraphFeatures gcn_input(nn::Context& cx, const std::string& prefix, const GraphBatch& b, Var nodes) {
  return {nodes, nn::embed(cx, prefix + "/pred", b.predicates)};
}

}  // namespace

Posterior encode(nn::Context& cx, const ModelConfig& cfg, const GraphBatch& b, const BatchTargets& t) {
  check_batch(cfg, b);
  const std::size_t n = b.num_nodes();
  if (t.boxes.size() != 6 * n || t.angle_bins.size() != n || t.codes.size() != cfg.code_dim * n)
    throw ShapeError("encode: targets do not cover " + std::to_string(n) + " nodes");
  ad::Tape& tp = cx.tape;
  Var box = tp.constant({n, 6}, t.boxes);
  Var code = tp.constant({n, cfg.code_dim}, t.codes);

  Var lay_in = ad::concat({nn::embed(cx, "enc/layout/cat", b.categories), nn::linear(cx, "enc/layout/box", box),
                           nn::embed(cx, "enc/layout/angle", t.angle_bins)},
                          1);
  GraphFeatures lay = gcn_stack(cx, "enc/layout/gcn", cfg.layers, b.index, gcn_input(cx, "enc/layout", b, lay_in));
  Var shp_in = ad::concat({nn::embed(cx, "enc/shape/cat", b.categories), nn::linear(cx, "enc/shape/code", code)}, 1);
  GraphFeatures shp = gcn_stack(cx, "enc/shape/gcn", cfg.layers, b.index, gcn_input(cx, "enc/shape", b, shp_in));
  Var fused = nn::linear(cx, "enc/shared/in", ad::concat({lay.nodes, shp.nodes}, 1));
  GraphFeatures sh = gcn_stack(cx, "enc/shared/gcn", cfg.layers, b.index, gcn_input(cx, "enc/shared", b, fused));
  Var post = nn::mlp2(cx, "enc/post", sh.nodes);
  return {ad::slice(post, 1, 0, cfg.z_dim), ad::slice(post, 1, cfg.z_dim, 2 * cfg.z_dim)};
}

namespace {

constexpr double kMaxLogExtent = 3.0;

// b * tanh(x / b), written through the sigmoid.
Var soft_bound(Var x, double b) { return ad::scale(ad::add_scalar(ad::sigmoid(ad::scale(x, 2.0 / b)), -0.5), 2.0 * b); }

}  // namespace

Decoded decode(nn::Context& cx, const ModelConfig& cfg, const GraphBatch& b, Var z) {
  check_batch(cfg, b);
  if (z.rows() != b.num_nodes() || z.cols() != cfg.z_dim)
    throw ShapeError("decode: latent " + ad::to_string(z.shape()) + " for " + std::to_string(b.num_nodes()) + " nodes");
  Var lay_in = ad::concat({nn::embed(cx, "dec/layout/cat", b.categories), z}, 1);
  GraphFeatures lay = gcn_stack(cx, "dec/layout/gcn", cfg.layers, b.index, gcn_input(cx, "dec/layout", b, lay_in));
  Var raw = nn::mlp2(cx, "dec/layout/box", lay.nodes);
  Var boxes = ad::concat({ad::exp(soft_bound(ad::slice(raw, 1, 0, 3), kMaxLogExtent)), ad::slice(raw, 1, 3, 6)}, 1);
  Var angle = nn::mlp2(cx, "dec/layout/angle", lay.nodes);
  Var shp_in = ad::concat({nn::embed(cx, "dec/shape/cat", b.categories), z}, 1);
  GraphFeatures shp = gcn_stack(cx, "dec/shape/gcn", cfg.layers, b.index, gcn_input(cx, "dec/shape", b, shp_in));
  Var codes = nn::mlp2(cx, "dec/shape/head", shp.nodes);
  return {boxes, angle, codes};
}

EditedBatch make_edited_batch(const std::vector<const SceneGraph*>& originals, const std::vector<const SceneGraph*>& edited,
                              const std::vector<const GraphChange*>& changes) {
  if (originals.size() != edited.size() || originals.size() != changes.size())
    throw Error("edited batch: originals, edits and changes differ in count");
  EditedBatch eb;
  eb.batch = make_batch(edited);
  std::size_t orig_off = 0;
  for (std::size_t k = 0; k < originals.size(); ++k) {
    const std::size_t n0 = originals[k]->nodes.size();
    const std::size_t n1 = edited[k]->nodes.size();
    if (n1 != n0 + changes[k]->added_nodes.size()) throw Error("edited batch: edited graph does not extend the original");
    std::vector<bool> mask = changes[k]->change_mask;
    if (mask.size() != n1) mask = compute_change_mask(*originals[k], *changes[k]);
    for (std::size_t i = 0; i < n1; ++i) {
      if (i < n0 && edited[k]->nodes[i].id != originals[k]->nodes[i].id)
        throw Error("edited batch: node order differs from the original");
      eb.source.push_back(i < n0 ? static_cast<int>(orig_off + i) : -1);
      eb.mask.push_back(mask[i]);
    }
    orig_off += n0;
  }
  return eb;
}

Var manipulate_latent(nn::Context& cx, const ModelConfig& cfg, const EditedBatch& eb, Var z, Var noise) {
  const std::size_t n0 = z.rows(), n1 = eb.batch.num_nodes();
  const std::size_t Z = cfg.z_dim;
  if (z.cols() != Z) throw ShapeError("manipulate_latent: latent width " + std::to_string(z.cols()));
  if (noise.rows() != n1 || noise.cols() != Z)
    throw ShapeError("manipulate_latent: noise " + ad::to_string(noise.shape()) + " for " + std::to_string(n1) + " nodes");
  if (eb.mask.size() != n1 || eb.source.size() != n1) throw ShapeError("manipulate_latent: mask does not cover the edited graph");
  std::vector<int> pad_idx(n1), splice_idx(n1);
  std::vector<double> noise_on(n1);
  for (std::size_t i = 0; i < n1; ++i) {
    const int src = eb.source[i];
    if (src >= static_cast<int>(n0)) throw Error("manipulate_latent: source row out of range");
    if (src < 0 && !eb.mask[i]) throw Error("manipulate_latent: added node outside the change mask");
    pad_idx[i] = src < 0 ? static_cast<int>(n0) : src;
    splice_idx[i] = eb.mask[i] ? static_cast<int>(n0 + i) : src;
    noise_on[i] = eb.mask[i] ? 1.0 : 0.0;
  }
  ad::Tape& tp = cx.tape;
  Var zhat = ad::embedding_lookup(ad::concat({z, tp.constant({1, Z}, 0.0)}, 0), pad_idx);
  Var tin = ad::concat({zhat, ad::row_scale(noise, noise_on), nn::embed(cx, "man/cat", eb.batch.categories)}, 1);
  GraphFeatures f = gcn_stack(cx, "man/gcn", cfg.layers, eb.batch.index,
                              {nn::linear(cx, "man/in", tin), nn::embed(cx, "man/pred", eb.batch.predicates)});
  Var zt = nn::mlp2(cx, "man/out", f.nodes);
  return ad::embedding_lookup(ad::concat({z, zt}, 0), splice_idx);
}

Var d_box_logits(nn::Context& cx, const ModelConfig& cfg, Var x) {
  if (x.cols() != cfg.d_box_input())
    throw ShapeError("d_box: input width " + std::to_string(x.cols()) + ", expected " + std::to_string(cfg.d_box_input()));
  Var h = ad::leaky_relu(nn::batch_norm(cx, "dbox/bn0", nn::linear(cx, "dbox/0", x)));
  h = ad::leaky_relu(nn::batch_norm(cx, "dbox/bn1", nn::linear(cx, "dbox/1", h)));
  return nn::linear(cx, "dbox/out", h);
}

DShapeOut d_shape_logits(nn::Context& cx, const ModelConfig& cfg, Var codes) {
  if (codes.cols() != cfg.code_dim)
    throw ShapeError("d_shape: input width " + std::to_string(codes.cols()) + ", expected " + std::to_string(cfg.code_dim));
  Var h = ad::leaky_relu(nn::batch_norm(cx, "dshape/bn0", nn::linear(cx, "dshape/0", codes)));
  h = ad::leaky_relu(nn::batch_norm(cx, "dshape/bn1", nn::linear(cx, "dshape/1", h)));
  return {nn::linear(cx, "dshape/prob", h), nn::linear(cx, "dshape/cls", h)};
}

Var d_box_input(ad::Tape& t, const ModelConfig& cfg, const std::vector<int>& cat_i, const std::vector<int>& cat_j,
                const std::vector<int>& pred, Var box_i, Var box_j) {
  const std::size_t n = cat_i.size();
  if (cat_j.size() != n || pred.size() != n || box_i.rows() != n || box_j.rows() != n || box_i.cols() != 7 || box_j.cols() != 7)
    throw ShapeError("d_box input: inconsistent tuple rows");
  const std::size_t C = static_cast<std::size_t>(cfg.num_categories), P = static_cast<std::size_t>(cfg.num_predicates);
  std::vector<double> oh(n * (2 * C + P), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    double* row = oh.data() + r * (2 * C + P);
    row[static_cast<std::size_t>(cat_i[r])] = 1.0;
    row[C + static_cast<std::size_t>(cat_j[r])] = 1.0;
    row[2 * C + static_cast<std::size_t>(pred[r])] = 1.0;
  }
  return ad::concat({t.constant({n, 2 * C + P}, std::move(oh)), box_i, box_j}, 1);
}

// ---------------------------------------------------------------------------

namespace {

ad::ParameterStore& readonly(const ad::ParameterStore& s) {
  // Parameters bound with trainable = false are only read.
  return const_cast<ad::ParameterStore&>(s);
}

std::vector<double> to_vector(Var v) { return {v.values().begin(), v.values().end()}; }

SceneObject decoded_object(const Decoded& d, std::size_t row, const ObjectNode& node, const SuperquadricCodec& codec,
                           const GenerateOptions& opt) {
  SceneObject o;
  o.id = node.id;
  o.category_id = node.category_id;
  std::array<double, 6> b{};
  for (std::size_t k = 0; k < 6; ++k) b[k] = d.boxes.at(row, k);
  int best = 0;
  for (int k = 1; k < kAngleBins; ++k)
    if (d.angle_logits.at(row, static_cast<std::size_t>(k)) > d.angle_logits.at(row, static_cast<std::size_t>(best))) best = k;
  o.box = to_box(b, angle_bin_center(best));
  ShapeCode raw{};
  for (std::size_t k = 0; k < kShapeCodeDim; ++k) raw[k] = d.codes.at(row, k);
  o.shape_code = codec.nearest(raw);
  if (opt.n_points > 0) o.points = object_points(o, codec, opt.n_points);
  return o;
}

}  // namespace

OrientedBox to_box(const std::array<double, 6>& r, double alpha_deg) {
  return {std::max(r[0], kMinExtent), std::max(r[1], kMinExtent), std::max(r[2], kMinExtent), r[3], r[4], r[5],
          normalize_degrees(alpha_deg)};
}

Posterior encode_scene_values(const Model& m, const SceneGraph& g, const Scene& s, ad::Tape& t) {
  check_alignment(s, g);
  nn::Context cx(t, readonly(m.gen), false, false);
  return encode(cx, m.cfg, make_batch(g), make_targets({&s}, m.cfg.code_dim));
}

std::pair<std::vector<double>, std::vector<double>> encode_scene(const Model& m, const SceneGraph& g, const Scene& s) {
  ad::Tape t;
  Posterior p = encode_scene_values(m, g, s, t);
  return {to_vector(p.mu), to_vector(p.logvar)};
}

std::vector<double> sample_latent(const std::vector<double>& mu, const std::vector<double>& logvar,
                                  const std::vector<double>& eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size()) throw ShapeError("sample_latent: mismatched lengths");
  std::vector<double> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(logvar[i] / 2) * eps[i];
  return z;
}

LayoutPrediction decode_scene(const Model& m, const std::vector<double>& z, const SceneGraph& g) {
  ad::Tape t;
  nn::Context cx(t, readonly(m.gen), false, false);
  const std::size_t n = g.nodes.size();
  if (z.size() != n * m.cfg.z_dim) throw ShapeError("decode_scene: latent length does not match the graph");
  Decoded d = decode(cx, m.cfg, make_batch(g), t.constant({n, m.cfg.z_dim}, z));
  LayoutPrediction p;
  for (std::size_t i = 0; i < n; ++i) {
    std::array<double, 6> b{};
    for (std::size_t k = 0; k < 6; ++k) b[k] = d.boxes.at(i, k);
    std::array<double, kAngleBins> a{};
    for (std::size_t k = 0; k < static_cast<std::size_t>(kAngleBins); ++k) a[k] = d.angle_logits.at(i, k);
    ShapeCode c{};
    for (std::size_t k = 0; k < kShapeCodeDim; ++k) c[k] = d.codes.at(i, k);
    p.boxes.push_back(b);
    p.angle_logits.push_back(a);
    p.codes.push_back(c);
  }
  return p;
}

Scene generate(const Model& m, const SceneGraph& g, std::uint64_t seed, const GenerateOptions& opt) {
  const auto report = validate_graph(g, m.vocab);
  if (!report.ok()) throw Error("generate: invalid graph: " + report.violations.front().kind + " at " + report.violations.front().where + ": " +
                             report.violations.front().message);
  const std::size_t n = g.nodes.size();
  std::vector<double> z(n * m.cfg.z_dim, 0.0);
  if (!opt.zero_latent) z = Rng(seed).normals(z.size());
  ad::Tape t;
  nn::Context cx(t, readonly(m.gen), false, false);
  Decoded d = decode(cx, m.cfg, make_batch(g), t.constant({n, m.cfg.z_dim}, std::move(z)));
  const SuperquadricCodec codec(m.cfg.num_categories);
  Scene s;
  for (std::size_t i = 0; i < n; ++i) s.objects.push_back(decoded_object(d, i, g.nodes[i], codec, opt));
  return s;
}

namespace {

struct ManipulationRun {
  SceneGraph edited;
  EditedBatch eb;
  Var z;
};

ManipulationRun run_manipulation(const Model& m, const SceneGraph& g, const Scene& s, const GraphChange& c,
                                 std::uint64_t seed, ad::Tape& t) {
  check_alignment(s, g);
  ManipulationRun r;
  r.edited = apply_change(g, c);
  const auto report = validate_graph(r.edited, m.vocab);
  if (!report.ok()) throw Error("manipulate: edited graph is invalid: " + report.violations.front().message);
  nn::Context cx(t, readonly(m.gen), false, false);
  Posterior post = encode(cx, m.cfg, make_batch(g), make_targets({&s}, m.cfg.code_dim));
  r.eb = make_edited_batch({&g}, {&r.edited}, {&c});
  const std::size_t n1 = r.edited.nodes.size();
  Var noise = t.constant({n1, m.cfg.z_dim}, Rng(seed).normals(n1 * m.cfg.z_dim));
  r.z = manipulate_latent(cx, m.cfg, r.eb, post.mu, noise);
  return r;
}

}  // namespace

std::vector<double> manipulate_latent_values(const Model& m, const SceneGraph& g, const Scene& s, const GraphChange& c,
                                             std::uint64_t seed) {
  ad::Tape t;
  return to_vector(run_manipulation(m, g, s, c, seed, t).z);
}

Scene manipulate_scene(const Model& m, const SceneGraph& g, const Scene& s, const GraphChange& c, std::uint64_t seed,
                       const GenerateOptions& opt) {
  check_alignment(s, g);
  if (c.empty()) return s;
  ad::Tape t;
  ManipulationRun r = run_manipulation(m, g, s, c, seed, t);
  nn::Context cx(t, readonly(m.gen), false, false);
  Decoded d = decode(cx, m.cfg, r.eb.batch, r.z);
  const SuperquadricCodec codec(m.cfg.num_categories);
  Scene out;
  for (std::size_t i = 0; i < r.edited.nodes.size(); ++i) {
    if (!r.eb.mask[i])
      out.objects.push_back(s.objects[static_cast<std::size_t>(r.eb.source[i])]);
    else
      out.objects.push_back(decoded_object(d, i, r.edited.nodes[i], codec, opt));
  }
  return out;
}

double d_box_forward(const Model& m, int o_i, int o_j, int r, const std::array<double, 7>& b_i, const std::array<double, 7>& b_j) {
  if (o_i < 0 || o_j < 0 || o_i >= m.cfg.num_categories || o_j >= m.cfg.num_categories || r < 0 || r >= m.cfg.num_predicates)
    throw Error("d_box: category or predicate out of range");
  ad::Tape t;
  nn::Context cx(t, readonly(m.disc), false, false);
  Var x = d_box_input(t, m.cfg, {o_i}, {o_j}, {r}, t.constant({1, 7}, std::vector<double>(b_i.begin(), b_i.end())),
                      t.constant({1, 7}, std::vector<double>(b_j.begin(), b_j.end())));
  return ad::sigmoid(d_box_logits(cx, m.cfg, x)).item();
}

std::pair<double, std::vector<double>> d_shape_forward(const Model& m, const ShapeCode& code) {
  ad::Tape t;
  nn::Context cx(t, readonly(m.disc), false, false);
  DShapeOut o = d_shape_logits(cx, m.cfg, t.constant({1, kShapeCodeDim}, std::vector<double>(code.begin(), code.end())));
  Var probs = ad::softmax(o.cat_logits, 1);
  return {ad::sigmoid(o.logit).item(), to_vector(probs)};
}

}  // namespace g2s
