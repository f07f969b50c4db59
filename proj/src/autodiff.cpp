#include "g2s/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "g2s/error.hpp"
#include "g2s/rng.hpp"

namespace g2s::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

MapC view(const std::vector<double>& v, Shape s) {
  return MapC(v.data(), static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}
Map view(std::vector<double>& v, Shape s) {
  return Map(v.data(), static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

Tape& same_tape(const char* op, Var a, Var b) {
  if (!a.valid() || !b.valid()) shape_fail(op, "invalid tensor handle");
  if (a.tape() != b.tape()) shape_fail(op, "operands recorded on different tapes");
  return *a.tape();
}

Tape& tape_of(const char* op, Var a) {
  if (!a.valid()) shape_fail(op, "invalid tensor handle");
  return *a.tape();
}

void require_same(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) shape_fail(op, "shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

template <class F>
Var unary(const char* op, Var a, F&& fwd_and_deriv) {
  // fwd_and_deriv(x) -> {y, dy/dx}
  Tape& t = tape_of(op, a);
  const auto& x = t.value(a.id());
  std::vector<double> y(x.size()), d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto [yi, di] = fwd_and_deriv(x[i]);
    y[i] = yi;
    d[i] = di;
  }
  const int ia = a.id();
  return t.push(a.shape(), std::move(y), t.needs_grad(ia), [ia, d = std::move(d)](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    auto& ga = tp.grad_mut(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * d[i];
  });
}

}  // namespace

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(const std::string& name, Shape shape, std::vector<double> init) {
  if (init.size() != shape.size())
    throw ShapeError("parameter " + name + ": init has " + std::to_string(init.size()) + " values for shape " + to_string(shape));
  if (params_.count(name)) throw Error("parameter " + name + " already exists");
  Parameter p;
  p.name = name;
  p.shape = shape;
  p.value = std::move(init);
  p.grad.assign(shape.size(), 0.0);
  p.m.assign(shape.size(), 0.0);
  p.v.assign(shape.size(), 0.0);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

std::vector<double>& ParameterStore::add_buffer(const std::string& name, std::vector<double> init) {
  if (buffers_.count(name)) throw Error("buffer " + name + " already exists");
  return buffers_.emplace(name, std::move(init)).first->second;
}

std::vector<double>& ParameterStore::buffer(const std::string& name) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw Error("unknown buffer " + name);
  return it->second;
}

const std::vector<double>& ParameterStore::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw Error("unknown buffer " + name);
  return it->second;
}

void ParameterStore::zero_grad() {
  for (auto& [n, p] : params_) {
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
    p.has_grad = false;
  }
}

std::size_t ParameterStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [k, p] : params_) n += p.value.size();
  return n;
}

void adam_step(ParameterStore& store, const AdamConfig& cfg) {
  if (!cfg.skip_missing)
    for (const auto& [name, p] : store.params())
      if (!p.has_grad) throw Error("adam_step: parameter " + name + " has no gradient");
  const std::int64_t t = store.step() + 1;
  store.set_step(t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  double clip = 1.0;
  if (cfg.max_grad_norm > 0) {
    double sq = 0;
    for (const auto& [name, p] : store.params())
      if (p.has_grad)
        for (double g : p.grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > cfg.max_grad_norm) clip = cfg.max_grad_norm / norm;
  }
  for (auto& [name, p] : store.params()) {
    if (!p.has_grad) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = clip * p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p.m[i] / bc1;
      const double vhat = p.v[i] / bc2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.zero_grad();
}

// ---------------------------------------------------------------------------
// Var / Tape

Shape Var::shape() const { return tape_->shape(id_); }
std::span<const double> Var::values() const { return tape_->value(id_); }
double Var::item() const {
  if (shape().size() != 1) throw ShapeError("item: tensor " + to_string(shape()) + " is not a scalar");
  return tape_->value(id_)[0];
}
double Var::at(std::size_t r, std::size_t c) const { return tape_->value(id_)[r * shape().cols + c]; }
bool Var::requires_grad() const { return tape_->needs_grad(id_); }

Var Tape::push(Shape s, std::vector<double> values, bool requires_grad, Backward bw) {
  if (values.size() != s.size()) throw ShapeError("internal: value count does not match " + to_string(s));
  Node n;
  n.shape = s;
  n.value = std::move(values);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Shape s, std::vector<double> values) { return push(s, std::move(values), false, {}); }

Var Tape::constant(Shape s, double fill) { return push(s, std::vector<double>(s.size(), fill), false, {}); }

Var Tape::variable(Shape s, std::vector<double> values) {
  return push(s, std::move(values), true, [](Tape&, int) {});
}

Var Tape::param(Parameter& p, bool trainable) {
  Var v = push(p.shape, p.value, trainable, [](Tape&, int) {});
  if (trainable) nodes_.back().param = &p;
  return v;
}

std::vector<double>& Tape::grad_mut(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error("backward: loss belongs to another tape");
  if (loss.shape().size() != 1) throw ShapeError("backward: loss " + to_string(loss.shape()) + " is not a scalar");
  if (backward_done_) throw Error("backward: already run on this tape");
  backward_done_ = true;
  if (!needs_grad(loss.id())) return;
  grad_mut(loss.id())[0] = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) {
      auto& pg = n.param->grad;
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
      n.param->has_grad = true;
    }
  }
}

std::span<const double> Tape::grad(Var v) const {
  static const std::vector<double> empty;
  const auto& n = nodes_[static_cast<std::size_t>(v.id())];
  return n.grad.empty() ? std::span<const double>(empty) : std::span<const double>(n.grad);
}

// ---------------------------------------------------------------------------
// Linear algebra and structure

Var matmul(Var a, Var b) {
  Tape& t = same_tape("matmul", a, b);
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.rows) shape_fail("matmul", "inner dimensions differ " + to_string(sa) + " x " + to_string(sb));
  const Shape so{sa.rows, sb.cols};
  std::vector<double> out(so.size());
  if (so.size() > 0) view(out, so).noalias() = view(t.value(a.id()), sa) * view(t.value(b.id()), sb);
  const int ia = a.id(), ib = b.id();
  return t.push(so, std::move(out), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib, sa, sb, so](Tape& tp, int self) {
    if (so.size() == 0) return;
    const auto g = view(tp.upstream(self), so);
    if (tp.needs_grad(ia)) view(tp.grad_mut(ia), sa).noalias() += g * view(tp.value(ib), sb).transpose();
    if (tp.needs_grad(ib)) view(tp.grad_mut(ib), sb).noalias() += view(tp.value(ia), sa).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape("add", a, b);
  require_same("add", a, b);
  const auto& x = t.value(a.id());
  const auto& y = t.value(b.id());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  const int ia = a.id(), ib = b.id();
  return t.push(a.shape(), std::move(out), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    for (int id : {ia, ib}) {
      if (!tp.needs_grad(id)) continue;
      auto& gx = tp.grad_mut(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape("sub", a, b);
  require_same("sub", a, b);
  const auto& x = t.value(a.id());
  const auto& y = t.value(b.id());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  const int ia = a.id(), ib = b.id();
  return t.push(a.shape(), std::move(out), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(ia)) {
      auto& gx = tp.grad_mut(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gy = tp.grad_mut(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape("mul", a, b);
  require_same("mul", a, b);
  const auto& x = t.value(a.id());
  const auto& y = t.value(b.id());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const int ia = a.id(), ib = b.id();
  return t.push(a.shape(), std::move(out), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(ia)) {
      auto& gx = tp.grad_mut(ia);
      const auto& y = tp.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gy = tp.grad_mut(ib);
      const auto& x = tp.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i] * x[i];
    }
  });
}

Var add_bias(Var a, Var bias) {
  Tape& t = same_tape("add_bias", a, bias);
  const Shape sa = a.shape();
  if (bias.shape() != Shape{1, sa.cols}) shape_fail("add_bias", "bias " + to_string(bias.shape()) + " does not match " + to_string(sa));
  const auto& x = t.value(a.id());
  const auto& b = t.value(bias.id());
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < sa.rows; ++r)
    for (std::size_t c = 0; c < sa.cols; ++c) out[r * sa.cols + c] = x[r * sa.cols + c] + b[c];
  const int ia = a.id(), ib = bias.id();
  return t.push(sa, std::move(out), t.needs_grad(ia) || t.needs_grad(ib), [ia, ib, sa](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(ia)) {
      auto& gx = tp.grad_mut(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tp.needs_grad(ib)) {
      auto& gb = tp.grad_mut(ib);
      for (std::size_t r = 0; r < sa.rows; ++r)
        for (std::size_t c = 0; c < sa.cols; ++c) gb[c] += g[r * sa.cols + c];
    }
  });
}

Var scale(Var a, double s) {
  return unary("scale", a, [s](double x) { return std::pair{x * s, s}; });
}

Var add_scalar(Var a, double s) {
  return unary("add_scalar", a, [s](double x) { return std::pair{x + s, 1.0}; });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  if (axis != 0 && axis != 1) shape_fail("concat", "axis must be 0 or 1");
  Tape& t = tape_of("concat", parts[0]);
  Shape so = parts[0].shape();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    same_tape("concat", parts[0], parts[k]);
    const Shape s = parts[k].shape();
    if (axis == 0) {
      if (s.cols != so.cols) shape_fail("concat", "column counts differ " + to_string(so) + " vs " + to_string(s));
      so.rows += s.rows;
    } else {
      if (s.rows != so.rows) shape_fail("concat", "row counts differ " + to_string(so) + " vs " + to_string(s));
      so.cols += s.cols;
    }
  }
  std::vector<double> out(so.size());
  std::vector<int> ids;
  std::vector<Shape> shapes;
  bool rg = false;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Shape s = p.shape();
    const auto& x = t.value(p.id());
    if (axis == 0) {
      std::copy(x.begin(), x.end(), out.begin() + static_cast<std::ptrdiff_t>(off * so.cols));
      off += s.rows;
    } else {
      for (std::size_t r = 0; r < s.rows; ++r)
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(r * s.cols), x.begin() + static_cast<std::ptrdiff_t>((r + 1) * s.cols),
                  out.begin() + static_cast<std::ptrdiff_t>(r * so.cols + off));
      off += s.cols;
    }
    ids.push_back(p.id());
    shapes.push_back(s);
    rg = rg || t.needs_grad(p.id());
  }
  return t.push(so, std::move(out), rg, [ids, shapes, so, axis](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const Shape s = shapes[k];
      if (tp.needs_grad(ids[k])) {
        auto& gx = tp.grad_mut(ids[k]);
        if (axis == 0) {
          for (std::size_t i = 0; i < s.size(); ++i) gx[i] += g[off * so.cols + i];
        } else {
          for (std::size_t r = 0; r < s.rows; ++r)
            for (std::size_t c = 0; c < s.cols; ++c) gx[r * s.cols + c] += g[r * so.cols + off + c];
        }
      }
      off += axis == 0 ? s.rows : s.cols;
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  Tape& t = tape_of("slice", a);
  const Shape sa = a.shape();
  const std::size_t lim = axis == 0 ? sa.rows : sa.cols;
  if ((axis != 0 && axis != 1) || begin > end || end > lim)
    shape_fail("slice", "range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " + std::to_string(axis) +
                            " of " + to_string(sa));
  const Shape so = axis == 0 ? Shape{end - begin, sa.cols} : Shape{sa.rows, end - begin};
  const auto& x = t.value(a.id());
  std::vector<double> out(so.size());
  for (std::size_t r = 0; r < so.rows; ++r)
    for (std::size_t c = 0; c < so.cols; ++c)
      out[r * so.cols + c] = axis == 0 ? x[(r + begin) * sa.cols + c] : x[r * sa.cols + c + begin];
  const int ia = a.id();
  return t.push(so, std::move(out), t.needs_grad(ia), [ia, sa, so, axis, begin](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    auto& gx = tp.grad_mut(ia);
    for (std::size_t r = 0; r < so.rows; ++r)
      for (std::size_t c = 0; c < so.cols; ++c) {
        const std::size_t src = axis == 0 ? (r + begin) * sa.cols + c : r * sa.cols + c + begin;
        gx[src] += g[r * so.cols + c];
      }
  });
}

Var embedding_lookup(Var table, std::span<const int> indices) {
  Tape& t = tape_of("embedding_lookup", table);
  const Shape st = table.shape();
  for (int i : indices)
    if (i < 0 || static_cast<std::size_t>(i) >= st.rows)
      shape_fail("embedding_lookup", "index " + std::to_string(i) + " outside table " + to_string(st));
  const Shape so{indices.size(), st.cols};
  const auto& x = t.value(table.id());
  std::vector<double> out(so.size());
  for (std::size_t r = 0; r < so.rows; ++r)
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(indices[r]) * st.cols), st.cols,
                out.begin() + static_cast<std::ptrdiff_t>(r * st.cols));
  const int it = table.id();
  std::vector<int> idx(indices.begin(), indices.end());
  return t.push(so, std::move(out), t.needs_grad(it), [it, st, idx = std::move(idx)](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    auto& gx = tp.grad_mut(it);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < st.cols; ++c) gx[static_cast<std::size_t>(idx[r]) * st.cols + c] += g[r * st.cols + c];
  });
}

Var scatter_add_rows(Var src, std::span<const int> indices, std::size_t out_rows) {
  Tape& t = tape_of("scatter_add_rows", src);
  const Shape ss = src.shape();
  if (indices.size() != ss.rows)
    shape_fail("scatter_add_rows", std::to_string(indices.size()) + " indices for " + to_string(ss));
  for (int i : indices)
    if (i < 0 || static_cast<std::size_t>(i) >= out_rows)
      shape_fail("scatter_add_rows", "index " + std::to_string(i) + " outside " + std::to_string(out_rows) + " rows");
  const Shape so{out_rows, ss.cols};
  const auto& x = t.value(src.id());
  std::vector<double> out(so.size(), 0.0);
  for (std::size_t r = 0; r < ss.rows; ++r)
    for (std::size_t c = 0; c < ss.cols; ++c) out[static_cast<std::size_t>(indices[r]) * ss.cols + c] += x[r * ss.cols + c];
  const int is = src.id();
  std::vector<int> idx(indices.begin(), indices.end());
  return t.push(so, std::move(out), t.needs_grad(is), [is, ss, idx = std::move(idx)](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    auto& gx = tp.grad_mut(is);
    for (std::size_t r = 0; r < ss.rows; ++r)
      for (std::size_t c = 0; c < ss.cols; ++c) gx[r * ss.cols + c] += g[static_cast<std::size_t>(idx[r]) * ss.cols + c];
  });
}

Var row_scale(Var a, std::span<const double> factors) {
  Tape& t = tape_of("row_scale", a);
  const Shape sa = a.shape();
  if (factors.size() != sa.rows) shape_fail("row_scale", std::to_string(factors.size()) + " factors for " + to_string(sa));
  const auto& x = t.value(a.id());
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < sa.rows; ++r)
    for (std::size_t c = 0; c < sa.cols; ++c) out[r * sa.cols + c] = x[r * sa.cols + c] * factors[r];
  const int ia = a.id();
  std::vector<double> f(factors.begin(), factors.end());
  return t.push(sa, std::move(out), t.needs_grad(ia), [ia, sa, f = std::move(f)](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    auto& gx = tp.grad_mut(ia);
    for (std::size_t r = 0; r < sa.rows; ++r)
      for (std::size_t c = 0; c < sa.cols; ++c) gx[r * sa.cols + c] += g[r * sa.cols + c] * f[r];
  });
}

Var residual_update(Var base, Var delta, const std::vector<bool>& mask) {
  Tape& t = same_tape("residual_update", base, delta);
  require_same("residual_update", base, delta);
  const Shape s = base.shape();
  if (mask.size() != s.rows) shape_fail("residual_update", std::to_string(mask.size()) + " mask entries for " + to_string(s));
  const auto& x = t.value(base.id());
  const auto& d = t.value(delta.id());
  std::vector<double> out = x;
  for (std::size_t r = 0; r < s.rows; ++r)
    if (mask[r])
      for (std::size_t c = 0; c < s.cols; ++c) out[r * s.cols + c] += d[r * s.cols + c];
  const int ib = base.id(), id = delta.id();
  return t.push(s, std::move(out), t.needs_grad(ib) || t.needs_grad(id), [ib, id, s, mask](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    if (tp.needs_grad(ib)) {
      auto& gx = tp.grad_mut(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (tp.needs_grad(id)) {
      auto& gd = tp.grad_mut(id);
      for (std::size_t r = 0; r < s.rows; ++r)
        if (mask[r])
          for (std::size_t c = 0; c < s.cols; ++c) gd[r * s.cols + c] += g[r * s.cols + c];
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0 ? std::pair{x, 1.0} : std::pair{0.0, 0.0}; });
}

Var leaky_relu(Var a, double slope) {
  return unary("leaky_relu", a, [slope](double x) { return x > 0 ? std::pair{x, 1.0} : std::pair{slope * x, slope}; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, [](double x) {
    const double y = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    return std::pair{y, y * (1.0 - y)};
  });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) {
    const double y = std::exp(x);
    return std::pair{y, y};
  });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return std::pair{x * x, 2.0 * x}; });
}

namespace {

// Softmax or log-softmax along rows (axis 1) or columns (axis 0).
Var softmax_impl(const char* op, Var a, int axis, bool log_space) {
  Tape& t = tape_of(op, a);
  if (axis != 0 && axis != 1) shape_fail(op, "axis must be 0 or 1");
  const Shape s = a.shape();
  const auto& x = t.value(a.id());
  std::vector<double> y(x.size());
  const std::size_t groups = axis == 1 ? s.rows : s.cols;
  const std::size_t len = axis == 1 ? s.cols : s.rows;
  auto at = [&](std::size_t g, std::size_t k) { return axis == 1 ? g * s.cols + k : k * s.cols + g; };
  for (std::size_t g = 0; g < groups; ++g) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, x[at(g, k)]);
    double z = 0;
    for (std::size_t k = 0; k < len; ++k) z += std::exp(x[at(g, k)] - mx);
    const double lz = std::log(z) + mx;
    for (std::size_t k = 0; k < len; ++k) y[at(g, k)] = log_space ? x[at(g, k)] - lz : std::exp(x[at(g, k)] - lz);
  }
  const int ia = a.id();
  return t.push(s, y, t.needs_grad(ia), [ia, s, axis, log_space, groups, len](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    const auto& y = tp.value(self);
    auto& gx = tp.grad_mut(ia);
    auto at = [&](std::size_t gi, std::size_t k) { return axis == 1 ? gi * s.cols + k : k * s.cols + gi; };
    for (std::size_t gi = 0; gi < groups; ++gi) {
      if (log_space) {
        double gs = 0;
        for (std::size_t k = 0; k < len; ++k) gs += g[at(gi, k)];
        for (std::size_t k = 0; k < len; ++k) gx[at(gi, k)] += g[at(gi, k)] - std::exp(y[at(gi, k)]) * gs;
      } else {
        double dot = 0;
        for (std::size_t k = 0; k < len; ++k) dot += g[at(gi, k)] * y[at(gi, k)];
        for (std::size_t k = 0; k < len; ++k) gx[at(gi, k)] += y[at(gi, k)] * (g[at(gi, k)] - dot);
      }
    }
  });
}

}  // namespace

Var softmax(Var a, int axis) { return softmax_impl("softmax", a, axis, false); }
Var log_softmax(Var a, int axis) { return softmax_impl("log_softmax", a, axis, true); }

Var batch_norm(Var x, Var gamma, Var beta, const BatchNormState& st, bool training) {
  Tape& t = same_tape("batch_norm", x, gamma);
  same_tape("batch_norm", x, beta);
  const Shape s = x.shape();
  if (gamma.shape() != Shape{1, s.cols} || beta.shape() != Shape{1, s.cols})
    shape_fail("batch_norm", "affine parameters must be [1x" + std::to_string(s.cols) + "], got " + to_string(gamma.shape()) +
                                 " and " + to_string(beta.shape()));
  if (!st.running_mean || !st.running_var || st.running_mean->size() != s.cols || st.running_var->size() != s.cols)
    shape_fail("batch_norm", "running statistics missing or not of width " + std::to_string(s.cols));
  if (training && s.rows == 0) shape_fail("batch_norm", "empty batch in training mode");
  const auto& xv = t.value(x.id());
  const auto& gv = t.value(gamma.id());
  const auto& bv = t.value(beta.id());
  const std::size_t n = s.rows, c = s.cols;
  std::vector<double> mu(c, 0.0), inv_std(c, 0.0), xhat(s.size()), out(s.size());
  if (training) {
    std::vector<double> var(c, 0.0);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < c; ++k) mu[k] += xv[r * c + k];
    for (auto& m : mu) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < c; ++k) {
        const double d = xv[r * c + k] - mu[k];
        var[k] += d * d;
      }
    for (std::size_t k = 0; k < c; ++k) {
      const double biased = var[k] / static_cast<double>(n);
      inv_std[k] = 1.0 / std::sqrt(biased + st.eps);
      const double unbiased = n > 1 ? var[k] / static_cast<double>(n - 1) : biased;
      if (!st.update_running) continue;
      (*st.running_mean)[k] = st.momentum * (*st.running_mean)[k] + (1.0 - st.momentum) * mu[k];
      (*st.running_var)[k] = st.momentum * (*st.running_var)[k] + (1.0 - st.momentum) * unbiased;
    }
  } else {
    for (std::size_t k = 0; k < c; ++k) {
      mu[k] = (*st.running_mean)[k];
      inv_std[k] = 1.0 / std::sqrt((*st.running_var)[k] + st.eps);
    }
  }
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < c; ++k) {
      const double xh = (xv[r * c + k] - mu[k]) * inv_std[k];
      xhat[r * c + k] = xh;
      out[r * c + k] = gv[k] * xh + bv[k];
    }
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  const bool rg = t.needs_grad(ix) || t.needs_grad(ig) || t.needs_grad(ib);
  return t.push(s, std::move(out), rg,
                [ix, ig, ib, n, c, training, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp, int self) {
                  const auto& g = tp.upstream(self);
                  const auto& gv = tp.value(ig);
                  std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
                  for (std::size_t r = 0; r < n; ++r)
                    for (std::size_t k = 0; k < c; ++k) {
                      sum_g[k] += g[r * c + k];
                      sum_gx[k] += g[r * c + k] * xhat[r * c + k];
                    }
                  if (tp.needs_grad(ig)) {
                    auto& gg = tp.grad_mut(ig);
                    for (std::size_t k = 0; k < c; ++k) gg[k] += sum_gx[k];
                  }
                  if (tp.needs_grad(ib)) {
                    auto& gb = tp.grad_mut(ib);
                    for (std::size_t k = 0; k < c; ++k) gb[k] += sum_g[k];
                  }
                  if (tp.needs_grad(ix)) {
                    auto& gx = tp.grad_mut(ix);
                    const double inv_n = 1.0 / static_cast<double>(n);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t k = 0; k < c; ++k) {
                        const double dy = g[r * c + k];
                        if (training)
                          gx[r * c + k] += gv[k] * inv_std[k] * (dy - inv_n * sum_g[k] - xhat[r * c + k] * inv_n * sum_gx[k]);
                        else
                          gx[r * c + k] += gv[k] * inv_std[k] * dy;
                      }
                  }
                });
}

// ---------------------------------------------------------------------------
// Reductions and losses

Var sum(Var a) {
  Tape& t = tape_of("sum", a);
  double s = 0;
  for (double v : t.value(a.id())) s += v;
  const int ia = a.id();
  return t.push({1, 1}, {s}, t.needs_grad(ia), [ia](Tape& tp, int self) {
    const double g = tp.upstream(self)[0];
    for (auto& v : tp.grad_mut(ia)) v += g;
  });
}

Var mean(Var a) {
  if (a.shape().size() == 0) shape_fail("mean", "empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.shape().size()));
}

Var l1_loss(Var pred, Var target) {
  Tape& t = same_tape("l1_loss", pred, target);
  require_same("l1_loss", pred, target);
  const Shape s = pred.shape();
  if (s.rows == 0) shape_fail("l1_loss", "empty batch");
  const auto& p = t.value(pred.id());
  const auto& q = t.value(target.id());
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  const double inv = 1.0 / static_cast<double>(s.rows);
  const int ip = pred.id(), iq = target.id();
  return t.push({1, 1}, {acc * inv}, t.needs_grad(ip) || t.needs_grad(iq), [ip, iq, inv](Tape& tp, int self) {
    const double g = tp.upstream(self)[0] * inv;
    const auto& p = tp.value(ip);
    const auto& q = tp.value(iq);
    auto sign = [](double d) { return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0); };
    if (tp.needs_grad(ip)) {
      auto& gp = tp.grad_mut(ip);
      for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * sign(p[i] - q[i]);
    }
    if (tp.needs_grad(iq)) {
      auto& gq = tp.grad_mut(iq);
      for (std::size_t i = 0; i < p.size(); ++i) gq[i] -= g * sign(p[i] - q[i]);
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Shape s = logits.shape();
  if (targets.size() != s.rows) shape_fail("cross_entropy", std::to_string(targets.size()) + " targets for " + to_string(s));
  if (s.rows == 0) shape_fail("cross_entropy", "empty batch");
  for (int k : targets)
    if (k < 0 || static_cast<std::size_t>(k) >= s.cols)
      shape_fail("cross_entropy", "target " + std::to_string(k) + " outside " + std::to_string(s.cols) + " classes");
  Var ls = log_softmax(logits, 1);
  Tape& t = *logits.tape();
  const auto& lv = t.value(ls.id());
  double acc = 0;
  for (std::size_t r = 0; r < s.rows; ++r) acc -= lv[r * s.cols + static_cast<std::size_t>(targets[r])];
  const double inv = 1.0 / static_cast<double>(s.rows);
  const int il = ls.id();
  std::vector<int> tg(targets.begin(), targets.end());
  return t.push({1, 1}, {acc * inv}, t.needs_grad(il), [il, s, inv, tg = std::move(tg)](Tape& tp, int self) {
    const double g = tp.upstream(self)[0] * inv;
    auto& gl = tp.grad_mut(il);
    for (std::size_t r = 0; r < s.rows; ++r) gl[r * s.cols + static_cast<std::size_t>(tg[r])] -= g;
  });
}

Var gaussian_sample(Var mu, Var logvar, Var eps) {
  Tape& t = same_tape("gaussian_sample", mu, logvar);
  same_tape("gaussian_sample", mu, eps);
  require_same("gaussian_sample", mu, logvar);
  require_same("gaussian_sample", mu, eps);
  const auto& m = t.value(mu.id());
  const auto& lv = t.value(logvar.id());
  const auto& e = t.value(eps.id());
  std::vector<double> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] + std::exp(lv[i] / 2) * e[i];
  const int im = mu.id(), il = logvar.id(), ie = eps.id();
  const bool rg = t.needs_grad(im) || t.needs_grad(il) || t.needs_grad(ie);
  return t.push(mu.shape(), std::move(out), rg, [im, il, ie](Tape& tp, int self) {
    const auto& g = tp.upstream(self);
    const auto& lv = tp.value(il);
    const auto& e = tp.value(ie);
    if (tp.needs_grad(im)) {
      auto& gm = tp.grad_mut(im);
      for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    }
    if (tp.needs_grad(il)) {
      auto& gl = tp.grad_mut(il);
      for (std::size_t i = 0; i < g.size(); ++i) gl[i] += g[i] * 0.5 * std::exp(lv[i] / 2) * e[i];
    }
    if (tp.needs_grad(ie)) {
      auto& ge = tp.grad_mut(ie);
      for (std::size_t i = 0; i < g.size(); ++i) ge[i] += g[i] * std::exp(lv[i] / 2);
    }
  });
}

Var gaussian_kl(Var mu, Var logvar) {
  Tape& t = same_tape("gaussian_kl", mu, logvar);
  require_same("gaussian_kl", mu, logvar);
  const Shape s = mu.shape();
  if (s.rows == 0) shape_fail("gaussian_kl", "empty batch");
  const auto& m = t.value(mu.id());
  const auto& lv = t.value(logvar.id());
  double acc = 0;
  for (std::size_t i = 0; i < m.size(); ++i) acc += 1.0 + lv[i] - m[i] * m[i] - std::exp(lv[i]);
  const double inv = 1.0 / static_cast<double>(s.rows);
  const int im = mu.id(), il = logvar.id();
  return t.push({1, 1}, {-0.5 * acc * inv}, t.needs_grad(im) || t.needs_grad(il), [im, il, inv](Tape& tp, int self) {
    const double g = tp.upstream(self)[0] * inv;
    const auto& m = tp.value(im);
    const auto& lv = tp.value(il);
    if (tp.needs_grad(im)) {
      auto& gm = tp.grad_mut(im);
      for (std::size_t i = 0; i < m.size(); ++i) gm[i] += g * m[i];
    }
    if (tp.needs_grad(il)) {
      auto& gl = tp.grad_mut(il);
      for (std::size_t i = 0; i < m.size(); ++i) gl[i] += g * 0.5 * (std::exp(lv[i]) - 1.0);
    }
  });
}

Var bce_with_logits(Var logits, double target) {
  Tape& t = tape_of("bce_with_logits", logits);
  const auto& x = t.value(logits.id());
  double acc = 0;
  for (double v : x) acc += std::max(v, 0.0) - v * target + std::log1p(std::exp(-std::abs(v)));
  const int il = logits.id();
  return t.push({1, 1}, {acc}, t.needs_grad(il), [il, target](Tape& tp, int self) {
    const double g = tp.upstream(self)[0];
    const auto& x = tp.value(il);
    auto& gx = tp.grad_mut(il);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      gx[i] += g * (s - target);
    }
  });
}

// ---------------------------------------------------------------------------
// Finite differences

namespace {

double rel_error(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

double grad_check(const ScalarFn& f, Shape shape, const std::vector<double>& x, double eps) {
  if (eps <= 0) throw Error("grad_check: eps must be positive");
  if (x.size() != shape.size()) throw ShapeError("grad_check: " + std::to_string(x.size()) + " values for " + to_string(shape));
  std::vector<double> analytic;
  {
    Tape t;
    Var xv = t.variable(shape, x);
    Var y = f(t, xv);
    if (!std::isfinite(y.item())) throw Error("grad_check: function value is not finite");
    t.backward(y);
    auto g = t.grad(xv);
    analytic.assign(g.begin(), g.end());
    if (analytic.empty()) analytic.assign(x.size(), 0.0);
  }
  auto eval = [&](const std::vector<double>& xs) {
    Tape t;
    Var xv = t.constant(shape, xs);
    const double v = f(t, xv).item();
    if (!std::isfinite(v)) throw Error("grad_check: function value is not finite");
    return v;
  };
  double worst = 0;
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + eps;
    const double fp = eval(xp);
    xp[i] = x[i] - eps;
    const double fm = eval(xp);
    xp[i] = x[i];
    worst = std::max(worst, rel_error(analytic[i], (fp - fm) / (2 * eps)));
  }
  return worst;
}

ParamCheckResult grad_check_params(const std::function<Var(Tape&)>& f, ParameterStore& store, const ParamCheckOptions& opt) {
  if (opt.eps <= 0) throw Error("grad_check_params: eps must be positive");
  store.zero_grad();
  {
    Tape t;
    Var y = f(t);
    if (!std::isfinite(y.item())) throw Error("grad_check_params: function value is not finite");
    t.backward(y);
  }
  auto eval = [&] {
    Tape t;
    const double v = f(t).item();
    if (!std::isfinite(v)) throw Error("grad_check_params: function value is not finite");
    return v;
  };
  ParamCheckResult res;
  Rng rng(opt.seed);
  for (auto& [name, p] : store.params()) {
    if (!p.has_grad) continue;
    std::vector<std::size_t> entries;
    if (opt.max_entries_per_param == 0 || opt.max_entries_per_param >= p.value.size()) {
      for (std::size_t i = 0; i < p.value.size(); ++i) entries.push_back(i);
    } else {
      for (std::size_t k = 0; k < opt.max_entries_per_param; ++k) entries.push_back(rng.below(p.value.size()));
    }
    const std::vector<double> analytic = p.grad;
    for (std::size_t i : entries) {
      const double x0 = p.value[i];
      p.value[i] = x0 + opt.eps;
      const double fp = eval();
      p.value[i] = x0 - opt.eps;
      const double fm = eval();
      p.value[i] = x0;
      const double e = rel_error(analytic[i], (fp - fm) / (2 * opt.eps));
      ++res.entries_checked;
      if (e > res.max_error) {
        res.max_error = e;
        res.worst_param = name;
      }
    }
  }
  store.zero_grad();
  return res;
}

}  // namespace g2s::ad
