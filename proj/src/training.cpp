#include "g2s/training.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "g2s/error.hpp"
#include "g2s/rng.hpp"

namespace g2s {

using ad::Var;

Json TrainConfig::to_json() const {
  return Json{{"lr", lr},
              {"batch_size", batch_size},
              {"epochs", epochs},
              {"seed", seed},
              {"max_grad_norm", max_grad_norm},
              {"lambda", {{"kl", lambda.kl}, {"box", lambda.box}, {"shape", lambda.shape}}},
              {"mix", {{"none", mix.none}, {"relabel", mix.relabel}, {"add", mix.add}}}};
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  recon_box += o.recon_box;
  recon_angle += o.recon_angle;
  recon_shape += o.recon_shape;
  kl += o.kl;
  d_box_g += o.d_box_g;
  d_box_d += o.d_box_d;
  d_shape_g += o.d_shape_g;
  d_shape_d += o.d_shape_d;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
  LossBreakdown r = *this;
  for (double* x : {&r.recon_box, &r.recon_angle, &r.recon_shape, &r.kl, &r.d_box_g, &r.d_box_d, &r.d_shape_g,
                    &r.d_shape_d, &r.total})
    *x *= s;
  return r;
}

Json LossBreakdown::to_json() const {
  return Json{{"recon_box", recon_box}, {"recon_angle", recon_angle}, {"recon_shape", recon_shape},
              {"kl", kl},               {"d_box_g", d_box_g},         {"d_box_d", d_box_d},
              {"d_shape_g", d_shape_g}, {"d_shape_d", d_shape_d},     {"total", total}};
}

ReconTerms loss_reconstruction(const Decoded& d, const BatchTargets& t, const std::vector<int>& rows,
                               const std::vector<int>& target_rows, std::size_t code_dim) {
  ad::Tape& tp = *d.boxes.tape();
  if (rows.size() != target_rows.size()) throw ShapeError("loss_reconstruction: row lists differ in length");
  if (rows.empty()) return {tp.constant({1, 1}, 0.0), tp.constant({1, 1}, 0.0), tp.constant({1, 1}, 0.0)};
  const std::size_t n = rows.size();
  std::vector<double> box(n * 6), code(n * code_dim);
  std::vector<int> bins(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t r = static_cast<std::size_t>(target_rows[k]);
    if (r >= t.angle_bins.size()) throw ShapeError("loss_reconstruction: target row out of range");
    std::copy_n(t.boxes.begin() + static_cast<std::ptrdiff_t>(6 * r), 6, box.begin() + static_cast<std::ptrdiff_t>(6 * k));
    std::copy_n(t.codes.begin() + static_cast<std::ptrdiff_t>(code_dim * r), code_dim,
                code.begin() + static_cast<std::ptrdiff_t>(code_dim * k));
    bins[k] = t.angle_bins[r];
  }
  return {ad::l1_loss(ad::embedding_lookup(d.boxes, rows), tp.constant({n, 6}, std::move(box))),
          ad::cross_entropy(ad::embedding_lookup(d.angle_logits, rows), bins),
          ad::l1_loss(ad::embedding_lookup(d.codes, rows), tp.constant({n, code_dim}, std::move(code)))};
}

Var loss_kl(Var mu, Var logvar) { return ad::gaussian_kl(mu, logvar); }

Var gan_generator_loss(Var fake_logits) { return ad::bce_with_logits(fake_logits, 1.0); }

Var gan_discriminator_loss(Var real_logits, Var fake_logits) {
  return ad::add(ad::bce_with_logits(real_logits, 1.0), ad::bce_with_logits(fake_logits, 0.0));
}

BatchPlan plan_batch(const Model& m, const std::vector<const Sample*>& batch, const TrainConfig& cfg, std::uint64_t seed,
                     std::optional<ManipulationMode> forced) {
  if (batch.empty()) throw Error("plan_batch: empty batch");
  Rng rng(seed);
  BatchPlan p;
  std::size_t n0 = 0, n1 = 0;
  for (const Sample* s : batch) {
    p.originals.push_back(&s->graph);
    p.scenes.push_back(&s->scene);
    ManipulationMode mode = forced ? *forced : draw_mode(cfg.mix, rng.next_u64());
    if (mode == ManipulationMode::Relabel && s->graph.edges.empty()) mode = ManipulationMode::None;
    auto [edited, change] = simulate_manipulation(s->graph, m.vocab, mode, rng.next_u64());
    p.modes.push_back(mode);
    n0 += s->graph.nodes.size();
    n1 += edited.nodes.size();
    p.edited.push_back(std::move(edited));
    p.changes.push_back(std::move(change));
  }
  p.eps = rng.normals(n0 * m.cfg.z_dim);
  p.noise = rng.normals(n1 * m.cfg.z_dim);
  p.pick_seed = rng.next_u64();
  return p;
}

namespace {

std::vector<double> box7(std::span<const double> box6, std::size_t row, double alpha_deg) {
  std::vector<double> b(box6.begin() + static_cast<std::ptrdiff_t>(6 * row), box6.begin() + static_cast<std::ptrdiff_t>(6 * row + 6));
  b.push_back(alpha_deg / 360.0);
  return b;
}

int argmax_row(Var logits, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.cols(); ++k)
    if (logits.at(row, k) > logits.at(row, best)) best = k;
  return static_cast<int>(best);
}

}  // namespace

GeneratorPass generator_pass(ad::Tape& t, Model& m, const BatchPlan& plan, const TrainConfig& cfg) {
  const ModelConfig& mc = m.cfg;
  nn::Context cg(t, m.gen, true, true);
  nn::Context cd(t, m.disc, false, true);
  cd.update_stats = false;

  const GraphBatch b0 = make_batch(plan.originals);
  const BatchTargets tg = make_targets(plan.scenes, mc.code_dim);
  const std::size_t n0 = b0.num_nodes();
  if (plan.eps.size() != n0 * mc.z_dim) throw ShapeError("generator pass: latent noise does not match the batch");
  Posterior post = encode(cg, mc, b0, tg);
  Var z = ad::gaussian_sample(post.mu, post.logvar, t.constant({n0, mc.z_dim}, plan.eps));

  std::vector<const SceneGraph*> edited;
  std::vector<const GraphChange*> changes;
  for (std::size_t k = 0; k < plan.edited.size(); ++k) {
    edited.push_back(&plan.edited[k]);
    changes.push_back(&plan.changes[k]);
  }
  const EditedBatch eb = make_edited_batch(plan.originals, edited, changes);
  const std::size_t n1 = eb.batch.num_nodes();
  Var zs = manipulate_latent(cg, mc, eb, z, t.constant({n1, mc.z_dim}, plan.noise));
  Decoded d = decode(cg, mc, eb.batch, zs);

  std::vector<int> rows, targets, masked;
  for (std::size_t i = 0; i < n1; ++i) {
    if (eb.mask[i]) {
      masked.push_back(static_cast<int>(i));
    } else {
      rows.push_back(static_cast<int>(i));
      targets.push_back(eb.source[i]);
    }
  }
  ReconTerms rec = loss_reconstruction(d, tg, rows, targets, mc.code_dim);
  Var kl = loss_kl(post.mu, post.logvar);
  Var total = ad::add(ad::add(rec.box, rec.angle), ad::add(rec.shape, ad::scale(kl, cfg.lambda.kl)));

  GeneratorPass out;
  Rng pick(plan.pick_seed);

  // Relationship discriminator on every changed edge.
  std::vector<int> fake_edges;
  for (std::size_t k = 0; k < plan.changes.size(); ++k) {
    const std::size_t eo = eb.batch.edge_offset[k];
    for (const auto& [e, p] : plan.changes[k].relabeled_edges) fake_edges.push_back(static_cast<int>(eo + e));
    const std::size_t base = plan.originals[k]->edges.size();
    for (std::size_t j = 0; j < plan.changes[k].added_edges.size(); ++j) fake_edges.push_back(static_cast<int>(eo + base + j));
  }
  if (cfg.lambda.box > 0 && !fake_edges.empty() && b0.num_edges() > 0) {
    const std::size_t F = fake_edges.size();
    std::vector<int> fsrc, fdst, fci, fcj, fp, rci, rcj, rp;
    std::vector<double> falpha_i, falpha_j, rbi, rbj;
    for (int e : fake_edges) {
      const int s = eb.batch.index.src[static_cast<std::size_t>(e)], o = eb.batch.index.dst[static_cast<std::size_t>(e)];
      fsrc.push_back(s);
      fdst.push_back(o);
      fci.push_back(eb.batch.categories[static_cast<std::size_t>(s)]);
      fcj.push_back(eb.batch.categories[static_cast<std::size_t>(o)]);
      fp.push_back(eb.batch.predicates[static_cast<std::size_t>(e)]);
      falpha_i.push_back(angle_bin_center(argmax_row(d.angle_logits, static_cast<std::size_t>(s))) / 360.0);
      falpha_j.push_back(angle_bin_center(argmax_row(d.angle_logits, static_cast<std::size_t>(o))) / 360.0);
    }
    for (std::size_t k = 0; k < F; ++k) {
      const std::size_t e = pick.below(b0.num_edges());
      const std::size_t s = static_cast<std::size_t>(b0.index.src[e]), o = static_cast<std::size_t>(b0.index.dst[e]);
      rci.push_back(b0.categories[s]);
      rcj.push_back(b0.categories[o]);
      rp.push_back(b0.predicates[e]);
      auto bi = box7(tg.boxes, s, angle_bin_center(tg.angle_bins[s]));
      auto bj = box7(tg.boxes, o, angle_bin_center(tg.angle_bins[o]));
      rbi.insert(rbi.end(), bi.begin(), bi.end());
      rbj.insert(rbj.end(), bj.begin(), bj.end());
    }
    Var fbi = ad::concat({ad::embedding_lookup(d.boxes, fsrc), t.constant({F, 1}, falpha_i)}, 1);
    Var fbj = ad::concat({ad::embedding_lookup(d.boxes, fdst), t.constant({F, 1}, falpha_j)}, 1);
    Var fake_in = d_box_input(t, mc, fci, fcj, fp, fbi, fbj);
    Var real_in = d_box_input(t, mc, rci, rcj, rp, t.constant({F, 7}, rbi), t.constant({F, 7}, rbj));
    Var logits = d_box_logits(cd, mc, ad::concat({real_in, fake_in}, 0));
    Var g_box = gan_generator_loss(ad::slice(logits, 0, F, 2 * F));
    total = ad::add(total, ad::scale(g_box, cfg.lambda.box));
    out.parts.d_box_g = g_box.item();
    out.disc.n_box = F;
    out.disc.box_real.assign(real_in.values().begin(), real_in.values().end());
    out.disc.box_fake.assign(fake_in.values().begin(), fake_in.values().end());
  }

  // Shape discriminator with auxiliary classifier on changed nodes.
  if (cfg.lambda.shape > 0 && !masked.empty()) {
    const std::size_t M = masked.size();
    std::vector<int> fcat, rrows, rcat;
    for (int i : masked) fcat.push_back(eb.batch.categories[static_cast<std::size_t>(i)]);
    std::vector<double> rcodes;
    for (std::size_t k = 0; k < M; ++k) {
      const std::size_t r = pick.below(n0);
      rcat.push_back(b0.categories[r]);
      rcodes.insert(rcodes.end(), tg.codes.begin() + static_cast<std::ptrdiff_t>(r * mc.code_dim),
                    tg.codes.begin() + static_cast<std::ptrdiff_t>((r + 1) * mc.code_dim));
    }
    Var fake_codes = ad::embedding_lookup(d.codes, masked);
    DShapeOut o = d_shape_logits(cd, mc, ad::concat({t.constant({M, mc.code_dim}, rcodes), fake_codes}, 0));
    Var aux = ad::scale(ad::cross_entropy(ad::slice(o.cat_logits, 0, M, 2 * M), fcat), static_cast<double>(M));
    Var g_shape = ad::add(gan_generator_loss(ad::slice(o.logit, 0, M, 2 * M)), aux);
    total = ad::add(total, ad::scale(g_shape, cfg.lambda.shape));
    out.parts.d_shape_g = g_shape.item();
    out.disc.n_shape = M;
    out.disc.code_real = std::move(rcodes);
    out.disc.code_fake.assign(fake_codes.values().begin(), fake_codes.values().end());
    out.disc.cat_real = std::move(rcat);
    out.disc.cat_fake = std::move(fcat);
  }

  out.parts.recon_box = rec.box.item();
  out.parts.recon_angle = rec.angle.item();
  out.parts.recon_shape = rec.shape.item();
  out.parts.kl = kl.item();
  out.parts.total = total.item();
  out.total = total;
  return out;
}

Var discriminator_pass(ad::Tape& t, Model& m, const DiscBatch& db, const TrainConfig& cfg, LossBreakdown& parts,
                       bool update_stats) {
  const ModelConfig& mc = m.cfg;
  nn::Context cd(t, m.disc, true, true);
  cd.update_stats = update_stats;
  Var loss = t.constant({1, 1}, 0.0);
  if (cfg.lambda.box > 0 && db.n_box > 0) {
    const std::size_t F = db.n_box, w = mc.d_box_input();
    Var logits = d_box_logits(cd, mc, ad::concat({t.constant({F, w}, db.box_real), t.constant({F, w}, db.box_fake)}, 0));
    Var l = gan_discriminator_loss(ad::slice(logits, 0, 0, F), ad::slice(logits, 0, F, 2 * F));
    parts.d_box_d = l.item();
    loss = ad::add(loss, l);
  }
  if (cfg.lambda.shape > 0 && db.n_shape > 0) {
    const std::size_t M = db.n_shape;
    DShapeOut o = d_shape_logits(
        cd, mc, ad::concat({t.constant({M, mc.code_dim}, db.code_real), t.constant({M, mc.code_dim}, db.code_fake)}, 0));
    std::vector<int> cats = db.cat_real;
    cats.insert(cats.end(), db.cat_fake.begin(), db.cat_fake.end());
    Var aux = ad::scale(ad::cross_entropy(o.cat_logits, cats), static_cast<double>(2 * M));
    Var l = ad::add(gan_discriminator_loss(ad::slice(o.logit, 0, 0, M), ad::slice(o.logit, 0, M, 2 * M)), aux);
    parts.d_shape_d = l.item();
    loss = ad::add(loss, l);
  }
  return loss;
}

LossBreakdown train_step(Model& m, const std::vector<const Sample*>& batch, const TrainConfig& cfg, std::uint64_t seed) {
  const BatchPlan plan = plan_batch(m, batch, cfg, seed);
  const ad::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8, true, cfg.max_grad_norm};
  LossBreakdown parts;
  DiscBatch db;
  {
    ad::Tape t;
    GeneratorPass g = generator_pass(t, m, plan, cfg);
    if (!std::isfinite(g.parts.total)) return g.parts;
    t.backward(g.total);
    adam_step(m.gen, adam);
    parts = g.parts;
    db = std::move(g.disc);
  }
  if (db.n_box > 0 || db.n_shape > 0) {
    ad::Tape t;
    Var l = discriminator_pass(t, m, db, cfg, parts);
    t.backward(l);
    adam_step(m.disc, adam);
  }
  return parts;
}

void train(Model& m, const std::vector<Sample>& data, const TrainConfig& cfg, std::ostream* log,
           const std::function<void(const EpochReport&)>& on_epoch) {
  if (data.empty()) throw Error("train: empty dataset");
  if (cfg.batch_size == 0 || cfg.epochs < 0 || !(cfg.lr > 0)) throw Error("train: invalid configuration");
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch))).shuffle(order);
    LossBreakdown sum;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const Sample*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) batch.push_back(&data[order[k]]);
      const std::uint64_t seed = derive_seed(derive_seed(cfg.seed, 0x7261696eULL + static_cast<std::uint64_t>(epoch)), batches);
      LossBreakdown l = train_step(m, batch, cfg, seed);
      if (!std::isfinite(l.total))
        throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));
      sum += l;
      ++batches;
    }
    EpochReport rep;
    rep.epoch = epoch;
    rep.mean = sum.scaled(1.0 / static_cast<double>(batches));
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log) {
      Json line = rep.mean.to_json();
      line["epoch"] = epoch;
      *log << line.dump() << "\n";
      log->flush();
    }
    if (on_epoch) on_epoch(rep);
  }
}

}  // namespace g2s
