#include "g2s/synthdata.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "g2s/error.hpp"

namespace g2s {

namespace {

enum Cat { Floor, Table, Desk, Chair, Sofa, Bed, Cabinet, Shelf, Lamp, Pillow, BoxCat, Plant, kNumCats };

struct CategorySpec {
  const char* name;
  SizePrior size;
  double e1_lo, e1_hi, e2_lo, e2_hi;
  std::vector<int> supports;  // categories this one may stand on besides the floor
};

const std::vector<CategorySpec>& specs() {
  static const std::vector<CategorySpec> s = {
      {"floor", {5.0, 5.0, 0.05}, 0.2, 0.25, 0.2, 0.25, {}},
      {"table", {1.4, 0.8, 0.75}, 0.2, 0.4, 0.2, 0.4, {}},
      {"desk", {1.2, 0.6, 0.75}, 0.2, 0.4, 0.2, 0.4, {}},
      {"chair", {0.5, 0.5, 0.9}, 0.3, 0.8, 0.3, 0.8, {}},
      {"sofa", {2.0, 0.9, 0.85}, 0.3, 0.7, 0.3, 0.7, {}},
      {"bed", {1.6, 2.0, 0.5}, 0.2, 0.5, 0.2, 0.5, {}},
      {"cabinet", {0.8, 0.45, 1.0}, 0.2, 0.3, 0.2, 0.3, {}},
      {"shelf", {1.0, 0.35, 1.8}, 0.2, 0.3, 0.2, 0.3, {}},
      {"lamp", {0.3, 0.3, 0.5}, 0.6, 1.2, 0.8, 1.2, {Table, Desk, Cabinet, Shelf}},
      {"pillow", {0.5, 0.35, 0.15}, 0.5, 1.0, 0.5, 1.0, {Bed, Sofa}},
      {"box", {0.4, 0.3, 0.3}, 0.2, 0.3, 0.2, 0.3, {Table, Desk, Shelf, Cabinet}},
      {"plant", {0.35, 0.35, 0.6}, 0.8, 1.4, 0.8, 1.2, {Table, Desk, Cabinet}},
  };
  return s;
}

constexpr double kMaxFootprintIou = 0.3;
constexpr int kMaxRejections = 1000;
constexpr double kFloorThickness = 0.05;

PrimitiveParams shape_for(int cat, const OrientedBox& b, Rng& rng) {
  const auto& sp = specs()[static_cast<std::size_t>(cat)];
  PrimitiveParams p;
  p.category_id = cat;
  p.ax = b.w / 2;
  p.ay = b.l / 2;
  p.az = b.h / 2;
  p.e1 = rng.uniform(sp.e1_lo, sp.e1_hi);
  p.e2 = rng.uniform(sp.e2_lo, sp.e2_hi);
  return p;
}

double draw_alpha(Rng& rng) { return 90.0 * static_cast<double>(rng.below(4)) + rng.uniform(0.0, 15.0); }

struct Placement {
  std::vector<int> cats;
  std::vector<OrientedBox> boxes;
  std::vector<std::optional<std::size_t>> support;
};

// Place furniture (index 0 is the floor). Returns false when some object could not be placed.
bool place(const SynthConfig& cfg, const std::vector<int>& cats, Rng& rng, Placement& out) {
  const double room = cfg.room_extent;
  out = {};
  out.cats.push_back(Floor);
  out.boxes.push_back({room, room, kFloorThickness, 0, 0, -kFloorThickness / 2, 0});
  out.support.push_back(std::nullopt);

  auto clear_of_others = [&](const OrientedBox& b, std::optional<std::size_t> sup) {
    for (std::size_t k = 1; k < out.boxes.size(); ++k) {
      if (sup && k == *sup) continue;
      if (footprint_iou(b, out.boxes[k]) >= kMaxFootprintIou) return false;
    }
    return true;
  };
  auto jitter = [&](const SizePrior& s) {
    return std::array<double, 3>{s.w * rng.uniform(0.85, 1.15), s.l * rng.uniform(0.85, 1.15), s.h * rng.uniform(0.85, 1.15)};
  };

  for (int cat : cats) {
    const auto& sp = specs()[static_cast<std::size_t>(cat)];
    const auto ext = jitter(sp.size);
    bool placed = false;

    std::vector<std::size_t> hosts;
    for (std::size_t k = 1; k < out.boxes.size(); ++k)
      if (!out.support[k] || *out.support[k] == 0)
        if (std::find(sp.supports.begin(), sp.supports.end(), out.cats[k]) != sp.supports.end()) hosts.push_back(k);
    if (!hosts.empty() && rng.uniform() < cfg.stack_probability) {
      const std::size_t host = hosts[rng.below(hosts.size())];
      const OrientedBox& hb = out.boxes[host];
      for (int t = 0; t < kMaxRejections && !placed; ++t) {
        const double mx = std::max(0.0, hb.w / 2 - std::min(ext[0], ext[1]) / 2);
        const double my = std::max(0.0, hb.l / 2 - std::min(ext[0], ext[1]) / 2);
        const double lx = rng.uniform(-mx, mx), ly = rng.uniform(-my, my);
        const double a = hb.alpha * std::numbers::pi / 180.0;
        OrientedBox b{ext[0], ext[1], ext[2], hb.cx + std::cos(a) * lx - std::sin(a) * ly,
                      hb.cy + std::sin(a) * lx + std::cos(a) * ly, hb.top() + ext[2] / 2, draw_alpha(rng)};
        if (!clear_of_others(b, host)) continue;
        out.cats.push_back(cat);
        out.boxes.push_back(b);
        out.support.push_back(host);
        placed = true;
      }
    }
    for (int t = 0; t < kMaxRejections && !placed; ++t) {
      const double r = std::max(ext[0], ext[1]) / 2;
      const double lim = std::max(0.0, room / 2 - r);
      OrientedBox b{ext[0], ext[1], ext[2], rng.uniform(-lim, lim), rng.uniform(-lim, lim), ext[2] / 2, draw_alpha(rng)};
      if (!clear_of_others(b, std::nullopt)) continue;
      out.cats.push_back(cat);
      out.boxes.push_back(b);
      out.support.push_back(0);
      placed = true;
    }
    if (!placed) return false;
  }
  return true;
}

}  // namespace

Vocabulary synthetic_vocabulary() {
  Vocabulary v;
  v.name = "synthetic";
  for (const auto& s : specs()) v.object_names.push_back(s.name);
  v.predicate_names = {"left of",      "right of",    "front of", "behind of", "higher than",
                       "lower than",   "smaller than", "bigger than", "same as", "standing on"};
  return v;
}

std::vector<SizePrior> synthetic_size_priors() {
  std::vector<SizePrior> out;
  for (const auto& s : specs()) out.push_back(s.size);
  return out;
}

Json SynthConfig::to_json() const {
  return Json{{"num_scenes", num_scenes},       {"min_objects", min_objects},
              {"max_objects", max_objects},     {"room_extent", room_extent},
              {"max_edges_per_node", max_edges_per_node}, {"stack_probability", stack_probability},
              {"seed", seed}};
}

SynthConfig SynthConfig::from_json(const Json& j) {
  SynthConfig c;
  c.num_scenes = j.value("num_scenes", c.num_scenes);
  c.min_objects = j.value("min_objects", c.min_objects);
  c.max_objects = j.value("max_objects", c.max_objects);
  c.room_extent = j.value("room_extent", c.room_extent);
  c.max_edges_per_node = j.value("max_edges_per_node", c.max_edges_per_node);
  c.stack_probability = j.value("stack_probability", c.stack_probability);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::vector<EdgeTriplet> derive_predicates(const Scene& s, const Vocabulary& v, int max_edges_per_node,
                                           const std::vector<std::optional<std::size_t>>& support,
                                           const std::vector<bool>& excluded, Rng& rng) {
  const std::size_t n = s.objects.size();
  if (support.size() != n || excluded.size() != n) throw Error("derive_predicates: support and exclusion lists must cover every object");
  const int standing = v.require_predicate("standing on");
  const auto same = v.predicate_index("same as");
  std::vector<std::pair<int, Rule>> checkable;
  for (int p = 0; p < v.num_predicates(); ++p)
    if (auto r = rule_for(v.predicate_names[static_cast<std::size_t>(p)])) checkable.emplace_back(p, *r);

  std::vector<EdgeTriplet> edges;
  for (std::size_t i = 0; i < n; ++i) {
    int budget = max_edges_per_node;
    if (support[i]) {
      edges.push_back({s.objects[i].id, s.objects[*support[i]].id, standing});
      --budget;
    }
    if (excluded[i] || budget <= 0) continue;
    std::vector<std::size_t> partners;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && !excluded[j]) partners.push_back(j);
    rng.shuffle(partners);
    const int want = std::min<int>(rng.uniform_int(1, budget), static_cast<int>(partners.size()));
    for (int k = 0; k < want; ++k) {
      const std::size_t j = partners[static_cast<std::size_t>(k)];
      std::vector<int> ok;
      for (const auto& [p, r] : checkable)
        if (constraint_check(r, s.objects[i].box, s.objects[j].box) &&
            !(same && p == *same && s.objects[i].category_id != s.objects[j].category_id))
          ok.push_back(p);
      if (ok.empty()) continue;
      edges.push_back({s.objects[i].id, s.objects[j].id, ok[rng.below(ok.size())]});
    }
  }
  return edges;
}

Sample synth_scene(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.min_objects < 2 || cfg.max_objects < cfg.min_objects) throw Error("synth: invalid object count range");
  if (!(cfg.room_extent > 0)) throw Error("synth: room extent must be positive");
  Rng rng(seed);
  const Vocabulary v = synthetic_vocabulary();
  const SuperquadricCodec codec(v.num_objects());

  int count = rng.uniform_int(cfg.min_objects, cfg.max_objects);
  Placement pl;
  while (true) {
    std::vector<int> cats;
    for (int k = 1; k < count; ++k) cats.push_back(1 + static_cast<int>(rng.below(kNumCats - 1)));
    // Large furniture first so small objects find their hosts.
    std::stable_sort(cats.begin(), cats.end(), [](int a, int b) {
      return specs()[static_cast<std::size_t>(a)].supports.empty() > specs()[static_cast<std::size_t>(b)].supports.empty();
    });
    if (place(cfg, cats, rng, pl)) break;
    if (count <= 2) throw Error("synth: could not place objects in the room");
    --count;
  }

  Sample out;
  out.graph.vocab = v.name;
  for (std::size_t i = 0; i < pl.cats.size(); ++i) {
    const int id = static_cast<int>(i);
    out.graph.nodes.push_back({id, pl.cats[i]});
    SceneObject o;
    o.id = id;
    o.category_id = pl.cats[i];
    o.box = pl.boxes[i];
    o.shape_code = codec.encode(shape_for(pl.cats[i], pl.boxes[i], rng));
    out.scene.objects.push_back(std::move(o));
  }
  std::vector<bool> excluded(pl.cats.size(), false);
  excluded[0] = true;
  out.graph.edges = derive_predicates(out.scene, v, cfg.max_edges_per_node, pl.support, excluded, rng);
  return out;
}

std::vector<Sample> make_scenes(const SynthConfig& cfg) {
  std::vector<Sample> out;
  out.reserve(cfg.num_scenes);
  for (std::size_t i = 0; i < cfg.num_scenes; ++i) out.push_back(synth_scene(cfg, derive_seed(cfg.seed, i)));
  return out;
}

std::string config_hash(const SynthConfig& cfg) {
  const std::string s = cfg.to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error("failed reading " + p.string());
  return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + p.string());
}

namespace {

std::string sample_stem(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return buf;
}

}  // namespace

void make_dataset(const SynthConfig& cfg, const std::filesystem::path& dir) {
  const Vocabulary v = synthetic_vocabulary();
  const auto samples = make_scenes(cfg);
  const std::size_t n_val = (cfg.num_scenes + 5) / 10;
  const std::size_t n_train = cfg.num_scenes - n_val;
  std::filesystem::create_directories(dir / "train");
  std::filesystem::create_directories(dir / "val");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const bool train = i < n_train;
    const auto sub = dir / (train ? "train" : "val");
    const std::string stem = sample_stem(train ? i : i - n_train);
    write_file(sub / (stem + ".graph.json"), write_graph(samples[i].graph, v));
    write_file(sub / (stem + ".scene.json"), write_scene(samples[i].scene, v));
  }
  write_file(dir / "vocab.json", write_vocabulary(v));
  Json manifest{{"config", cfg.to_json()}, {"seed", cfg.seed}, {"hash", config_hash(cfg)},
                {"train", n_train}, {"val", n_val}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Vocabulary load_dataset_vocabulary(const std::filesystem::path& dir) {
  return read_vocabulary(read_file(dir / "vocab.json"));
}

std::vector<Sample> load_split(const std::filesystem::path& dir, const std::string& split, const Vocabulary& v) {
  const auto sub = dir / split;
  if (!std::filesystem::is_directory(sub)) throw Error("no split directory " + sub.string());
  std::vector<std::filesystem::path> graphs;
  for (const auto& e : std::filesystem::directory_iterator(sub)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 11 && name.ends_with(".graph.json")) graphs.push_back(e.path());
  }
  std::sort(graphs.begin(), graphs.end());
  std::vector<Sample> out;
  for (const auto& gp : graphs) {
    const std::string stem = gp.filename().string().substr(0, gp.filename().string().size() - 11);
    Sample s;
    s.graph = read_graph(read_file(gp), v);
    s.scene = read_scene(read_file(sub / (stem + ".scene.json")), v);
    check_alignment(s.scene, s.graph);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace g2s
