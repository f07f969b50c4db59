#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tape records every op in execution order, so its node list is already a
// topological order and backward() is a single reverse sweep. Parameters live
// outside tapes in a ParameterStore; Tape::param() makes a leaf whose adjoint
// is accumulated into Parameter::grad. The core draws no random numbers:
// noise enters as explicit tensors.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace g2s::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool has_grad = false;
  std::vector<double> m, v;  // Adam moments
};

/// Named trainable tensors plus non-trainable buffers (batch-norm running
/// statistics) and the Adam step counter. std::map keeps iteration order
/// stable, which checkpoints and optimizers rely on.
class ParameterStore {
public:
  Parameter& add(const std::string& name, Shape shape, std::vector<double> init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }

  std::vector<double>& add_buffer(const std::string& name, std::vector<double> init);
  std::vector<double>& buffer(const std::string& name);
  const std::vector<double>& buffer(const std::string& name) const;

  void zero_grad();
  std::size_t num_values() const;

  std::map<std::string, Parameter>& params() { return params_; }
  const std::map<std::string, Parameter>& params() const { return params_; }
  std::map<std::string, std::vector<double>>& buffers() { return buffers_; }
  const std::map<std::string, std::vector<double>>& buffers() const { return buffers_; }

  std::int64_t step() const { return step_; }
  void set_step(std::int64_t t) { step_ = t; }

private:
  std::map<std::string, Parameter> params_;
  std::map<std::string, std::vector<double>> buffers_;
  std::int64_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Skip parameters that received no gradient this step instead of failing.
  bool skip_missing = false;
  /// Rescale gradients whose global L2 norm exceeds this (0 disables).
  double max_grad_norm = 0;
};

/// Bias-corrected Adam on every parameter of `store`; clears gradients.
void adam_step(ParameterStore& store, const AdamConfig& cfg = {});

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Var {
public:
  Var() = default;
  Shape shape() const;
  std::size_t rows() const { return shape().rows; }
  std::size_t cols() const { return shape().cols; }
  std::span<const double> values() const;
  double item() const;
  double at(std::size_t r, std::size_t c) const;
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Shape s, std::vector<double> values);
  Var constant(Shape s, double fill);
  /// Leaf that records its own adjoint (read with grad()).
  Var variable(Shape s, std::vector<double> values);
  /// Leaf bound to a parameter; `trainable` false treats it as a constant.
  Var param(Parameter& p, bool trainable = true);

  /// Seed d(loss)/d(loss) = 1 and sweep backward. `loss` must be 1x1.
  void backward(Var loss);
  std::span<const double> grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // Op construction interface (used by the op functions in this header).
  using Backward = std::function<void(Tape&, int self)>;
  Var push(Shape s, std::vector<double> values, bool requires_grad, Backward bw);
  const std::vector<double>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  std::vector<double>& grad_mut(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  Shape shape(int id) const { return nodes_[static_cast<std::size_t>(id)].shape; }
  /// Adjoint of node `id` during backward (zeros if never reached).
  const std::vector<double>& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---------------------------------------------------------------------------
// Ops. Every op checks shapes and throws g2s::ShapeError naming itself.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a + bias, with bias 1 x cols broadcast over rows.
Var add_bias(Var a, Var bias);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var concat(const std::vector<Var>& parts, int axis);
/// Rows (axis 0) or columns (axis 1) in [begin, end).
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
/// out[i] = table[indices[i]] (row gather).
Var embedding_lookup(Var table, std::span<const int> indices);
/// out[indices[i]] += src[i], out has `out_rows` rows.
Var scatter_add_rows(Var src, std::span<const int> indices, std::size_t out_rows);
/// Multiply row r by the constant factors[r].
Var row_scale(Var a, std::span<const double> factors);
/// base + delta on rows where mask is true; base copied bit-exactly elsewhere.
Var residual_update(Var base, Var delta, const std::vector<bool>& mask);
Var relu(Var a);
inline constexpr double kLeakySlope = 0.2;
Var leaky_relu(Var a, double slope = kLeakySlope);
Var sigmoid(Var a);
Var exp(Var a);
Var square(Var a);
Var softmax(Var a, int axis);
Var log_softmax(Var a, int axis);

struct BatchNormState {
  std::vector<double>* running_mean = nullptr;
  std::vector<double>* running_var = nullptr;
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
  double eps = 1e-5;
  bool update_running = true;  // train mode only
};
/// Per-column normalization; train mode uses batch statistics (and updates
/// the running ones), eval mode the running statistics.
Var batch_norm(Var x, Var gamma, Var beta, const BatchNormState& state, bool training);

Var mean(Var a);
Var sum(Var a);
/// Mean over rows of the row-wise L1 distance.
Var l1_loss(Var pred, Var target);
/// Mean over rows of -log softmax(logits)[row, target].
Var cross_entropy(Var logits, std::span<const int> targets);
/// z = mu + exp(logvar / 2) * eps.
Var gaussian_sample(Var mu, Var logvar, Var eps);
/// Mean over rows of KL(N(mu, exp(logvar)) || N(0, I)).
Var gaussian_kl(Var mu, Var logvar);
/// Sum over entries of the binary cross-entropy of sigmoid(logits) vs target.
Var bce_with_logits(Var logits, double target);

// ---------------------------------------------------------------------------
// Finite-difference verification.

using ScalarFn = std::function<Var(Tape&, Var)>;

/// max_i |analytic_i - fd_i| / max(1, |analytic_i|, |fd_i|), central differences.
double grad_check(const ScalarFn& f, Shape shape, const std::vector<double>& x, double eps = 1e-5);

struct ParamCheckOptions {
  double eps = 1e-5;
  /// Entries probed per parameter tensor (all entries when 0).
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct ParamCheckResult {
  double max_error = 0;
  std::string worst_param;
  std::size_t entries_checked = 0;
};

/// Same comparison for every parameter of `store` that `f` reaches.
ParamCheckResult grad_check_params(const std::function<Var(Tape&)>& f, ParameterStore& store,
                                   const ParamCheckOptions& opt = {});

}  // namespace g2s::ad
