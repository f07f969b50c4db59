#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "g2s/model.hpp"
#include "g2s/synthdata.hpp"

namespace g2s {

struct LossWeights {
  double kl = 0.1;
  double box = 0.1;    // D_box generator term
  double shape = 0.1;  // D_shape generator term
};

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 8;
  int epochs = 100;
  std::uint64_t seed = 0;
  double max_grad_norm = 10.0;  // per optimizer, 0 disables
  LossWeights lambda;
  ManipulationMixture mix;

  Json to_json() const;
};

/// Generator terms are the quantities the generator minimizes; d_* the
/// discriminator objective. The shape terms include the auxiliary
/// classification loss.
struct LossBreakdown {
  double recon_box = 0, recon_angle = 0, recon_shape = 0, kl = 0;
  double d_box_g = 0, d_box_d = 0, d_shape_g = 0, d_shape_d = 0;
  double total = 0;

  double recon() const { return recon_box + recon_angle + recon_shape; }
  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown scaled(double s) const;
  Json to_json() const;
};

// Loss terms on tape values.

struct ReconTerms {
  ad::Var box, angle, shape;
};
/// Mean over `rows` of the decoded outputs against targets row `target_rows[k]`;
/// zero when `rows` is empty.
ReconTerms loss_reconstruction(const Decoded& d, const BatchTargets& t, const std::vector<int>& rows,
                               const std::vector<int>& target_rows, std::size_t code_dim);
ad::Var loss_kl(ad::Var mu, ad::Var logvar);
/// Non-saturating generator term: sum of -log D(fake).
ad::Var gan_generator_loss(ad::Var fake_logits);
/// Sum of -log D(real) - log(1 - D(fake)).
ad::Var gan_discriminator_loss(ad::Var real_logits, ad::Var fake_logits);

/// Everything random about one training step, drawn up front.
struct BatchPlan {
  std::vector<const SceneGraph*> originals;
  std::vector<const Scene*> scenes;
  std::vector<SceneGraph> edited;
  std::vector<GraphChange> changes;
  std::vector<ManipulationMode> modes;
  std::vector<double> eps;    // N0 x Z
  std::vector<double> noise;  // N1 x Z
  std::uint64_t pick_seed = 0;
};

/// `forced` overrides the mixture for every sample.
BatchPlan plan_batch(const Model& m, const std::vector<const Sample*>& batch, const TrainConfig& cfg, std::uint64_t seed,
                     std::optional<ManipulationMode> forced = std::nullopt);

/// Discriminator inputs produced by a generator pass (values only).
struct DiscBatch {
  std::size_t n_box = 0;
  std::vector<double> box_real, box_fake;  // n_box x d_box_input
  std::size_t n_shape = 0;
  std::vector<double> code_real, code_fake;  // n_shape x code_dim
  std::vector<int> cat_real, cat_fake;
};

struct GeneratorPass {
  ad::Var total;
  LossBreakdown parts;
  DiscBatch disc;
};

/// Generator objective on `t`. Generator parameters are trainable leaves;
/// discriminator parameters enter as constants and keep their statistics.
GeneratorPass generator_pass(ad::Tape& t, Model& m, const BatchPlan& plan, const TrainConfig& cfg);
/// Discriminator objective on `t` over fixed real and fake inputs.
ad::Var discriminator_pass(ad::Tape& t, Model& m, const DiscBatch& d, const TrainConfig& cfg, LossBreakdown& parts,
                           bool update_stats = true);

/// One generator step then one discriminator step.
LossBreakdown train_step(Model& m, const std::vector<const Sample*>& batch, const TrainConfig& cfg, std::uint64_t seed);

struct EpochReport {
  int epoch = 0;
  LossBreakdown mean;
  double seconds = 0;
};

/// Runs cfg.epochs epochs. Each epoch's mean losses are appended to `log`
/// (one JSON object per line) and passed to `on_epoch`.
void train(Model& m, const std::vector<Sample>& data, const TrainConfig& cfg, std::ostream* log = nullptr,
           const std::function<void(const EpochReport&)>& on_epoch = {});

}  // namespace g2s
