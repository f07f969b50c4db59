#include "g2s/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "g2s/documents.hpp"
#include "g2s/error.hpp"

namespace g2s {

namespace {

constexpr char kMagic[] = "G23DCK1";
constexpr std::size_t kMagicLen = 7;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

struct Entry {
  std::string name;
  std::size_t rows, cols;
  const std::vector<double>* data;
};

// Tensor directory in a fixed order: parameters, their Adam moments, buffers.
std::vector<Entry> directory(const Model& m) {
  std::vector<Entry> out;
  for (const auto& [prefix, store] : {std::pair{std::string("gen/"), &m.gen}, std::pair{std::string("disc/"), &m.disc}}) {
    for (const auto& [name, p] : store->params()) {
      out.push_back({prefix + name, p.shape.rows, p.shape.cols, &p.value});
      if (!p.m.empty()) {
        out.push_back({prefix + name + "#m", p.shape.rows, p.shape.cols, &p.m});
        out.push_back({prefix + name + "#v", p.shape.rows, p.shape.cols, &p.v});
      }
    }
    for (const auto& [name, b] : store->buffers()) out.push_back({prefix + name, 1, b.size(), &b});
  }
  return out;
}

void put_u64(std::string& s, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint64_t get_u64(const std::string& s, std::size_t at) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[at + k])) << (8 * k);
  return v;
}

}  // namespace

std::string checkpoint_bytes(const Model& m) {
  Json dir = Json::array();
  std::size_t offset = 0;
  const auto entries = directory(m);
  for (const Entry& e : entries) {
    dir.push_back({{"name", e.name}, {"shape", {e.rows, e.cols}}, {"offset", offset}});
    offset += e.data->size();
  }
  const Json header{{"version", kCheckpointVersion},
                    {"vocabulary", vocabulary_to_json(m.vocab)},
                    {"hyperparams", m.cfg.to_json()},
                    {"adam_steps", {{"gen", m.gen.step()}, {"disc", m.disc.step()}}},
                    {"values", offset},
                    {"tensors", dir}};
  const std::string h = header.dump();
  std::string out(kMagic, kMagicLen);
  put_u64(out, h.size());
  out += h;
  out.reserve(out.size() + offset * 8);
  for (const Entry& e : entries) {
    const std::size_t at = out.size();
    out.resize(at + e.data->size() * 8);
    std::memcpy(out.data() + at, e.data->data(), e.data->size() * 8);
  }
  return out;
}

Model checkpoint_from_bytes(const std::string& bytes, const std::optional<Vocabulary>& expected) {
  const std::size_t head = std::min(bytes.size(), kMagicLen);
  if (bytes.compare(0, head, kMagic, head) != 0) throw Error("checkpoint: bad magic, not a checkpoint file");
  if (bytes.size() < kMagicLen + 8) throw Error("checkpoint corrupt: truncated header");
  const std::uint64_t hlen = get_u64(bytes, kMagicLen);
  const std::size_t start = kMagicLen + 8;
  if (hlen > bytes.size() - start) throw Error("checkpoint corrupt: truncated header");
  Json header;
  try {
    header = Json::parse(bytes.substr(start, hlen));
  } catch (const Json::exception& e) {
    throw Error(std::string("checkpoint corrupt: unreadable header: ") + e.what());
  }
  if (!header.contains("version") || header["version"] != kCheckpointVersion)
    throw Error("checkpoint: unsupported version " + (header.contains("version") ? header["version"].dump() : "(none)"));
  const Vocabulary vocab = vocabulary_from_json(header.at("vocabulary"));
  const ModelConfig cfg = ModelConfig::from_json(header.at("hyperparams"));
  if (expected) {
    if (expected->object_names.size() != vocab.object_names.size())
      throw Error("checkpoint: category embedding gen/enc/layout/cat has " + std::to_string(vocab.object_names.size()) +
                  " rows but the vocabulary has " + std::to_string(expected->object_names.size()) + " categories");
    if (expected->predicate_names.size() != vocab.predicate_names.size())
      throw Error("checkpoint: predicate embedding gen/enc/layout/pred has " + std::to_string(vocab.predicate_names.size()) +
                  " rows but the vocabulary has " + std::to_string(expected->predicate_names.size()) + " predicates");
  }
  if (static_cast<std::size_t>(cfg.num_categories) != vocab.object_names.size() ||
      static_cast<std::size_t>(cfg.num_predicates) != vocab.predicate_names.size())
    throw Error("checkpoint: hyperparameters disagree with the stored vocabulary size");

  Model m(vocab, cfg, 0);
  const std::size_t payload = start + hlen;
  const std::uint64_t total = header.at("values").get<std::uint64_t>();
  if ((bytes.size() - payload) / 8 < total || (bytes.size() - payload) % 8 != 0 || (bytes.size() - payload) / 8 != total)
    throw Error("checkpoint corrupt: payload holds " + std::to_string((bytes.size() - payload) / 8) + " values, header declares " +
                std::to_string(total));

  std::map<std::string, const Json*> stored;
  for (const Json& t : header.at("tensors")) stored[t.at("name").get<std::string>()] = &t;

  auto fill = [&](const std::string& name, std::size_t rows, std::size_t cols, std::vector<double>& dst, bool optional) {
    auto it = stored.find(name);
    if (it == stored.end()) {
      if (optional) return;
      throw Error("checkpoint: missing tensor " + name);
    }
    const Json& t = *it->second;
    const std::size_t r = t.at("shape").at(0).get<std::size_t>(), c = t.at("shape").at(1).get<std::size_t>();
    if (r != rows || c != cols)
      throw Error("checkpoint: tensor " + name + " has shape " + std::to_string(r) + "x" + std::to_string(c) + ", expected " +
                  std::to_string(rows) + "x" + std::to_string(cols));
    const std::uint64_t off = t.at("offset").get<std::uint64_t>();
    if (off > total || r * c > total - off) throw Error("checkpoint corrupt: tensor " + name + " lies outside the payload");
    dst.resize(r * c);
    std::memcpy(dst.data(), bytes.data() + payload + off * 8, r * c * 8);
    stored.erase(it);
  };

  for (const auto& [prefix, store] : {std::pair{std::string("gen/"), &m.gen}, std::pair{std::string("disc/"), &m.disc}}) {
    for (auto& [name, p] : store->params()) {
      fill(prefix + name, p.shape.rows, p.shape.cols, p.value, false);
      fill(prefix + name + "#m", p.shape.rows, p.shape.cols, p.m, true);
      fill(prefix + name + "#v", p.shape.rows, p.shape.cols, p.v, true);
      if (p.m.size() != p.v.size()) throw Error("checkpoint: tensor " + prefix + name + " has only one Adam moment");
    }
    for (auto& [name, b] : store->buffers()) fill(prefix + name, 1, b.size(), b, false);
  }
  if (!stored.empty()) throw Error("checkpoint: unexpected tensor " + stored.begin()->first);
  m.gen.set_step(header.at("adam_steps").at("gen").get<std::int64_t>());
  m.disc.set_step(header.at("adam_steps").at("disc").get<std::int64_t>());
  return m;
}

void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write checkpoint " + path);
  const std::string b = checkpoint_bytes(m);
  f.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!f) throw Error("failed writing checkpoint " + path);
}

Model load_checkpoint(const std::string& path, const std::optional<Vocabulary>& expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return checkpoint_from_bytes(ss.str(), expected);
}

}  // namespace g2s
