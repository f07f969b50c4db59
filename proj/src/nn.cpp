#include "g2s/nn.hpp"

#include <cmath>

#include "g2s/error.hpp"
#include "g2s/rng.hpp"

namespace g2s::nn {

ad::Var Context::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  ad::Var v = tape.param(store.get(name), trainable);
  bound_.emplace(name, v);
  return v;
}

void init_linear(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                 double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (double& x : w) x = rng.uniform(-bound, bound);
  store.add(name + "/W", {in, out}, std::move(w));
  store.add(name + "/b", {1, out}, std::vector<double>(out, 0.0));
}

ad::Var linear(Context& cx, const std::string& name, ad::Var x) {
  return ad::add_bias(ad::matmul(x, cx.param(name + "/W")), cx.param(name + "/b"));
}

void init_embedding(ad::ParameterStore& store, const std::string& name, std::size_t rows, std::size_t width, Rng& rng) {
  std::vector<double> w(rows * width);
  for (double& x : w) x = 0.5 * rng.normal();
  store.add(name, {rows, width}, std::move(w));
}

ad::Var embed(Context& cx, const std::string& name, std::span<const int> indices) {
  return ad::embedding_lookup(cx.param(name), indices);
}

void init_batch_norm(ad::ParameterStore& store, const std::string& name, std::size_t width) {
  store.add(name + "/gamma", {1, width}, std::vector<double>(width, 1.0));
  store.add(name + "/beta", {1, width}, std::vector<double>(width, 0.0));
  store.add_buffer(name + "/running_mean", std::vector<double>(width, 0.0));
  store.add_buffer(name + "/running_var", std::vector<double>(width, 1.0));
}

ad::Var batch_norm(Context& cx, const std::string& name, ad::Var x) {
  ad::BatchNormState st;
  st.running_mean = &cx.store.buffer(name + "/running_mean");
  st.running_var = &cx.store.buffer(name + "/running_var");
  st.update_running = cx.update_stats;
  return ad::batch_norm(x, cx.param(name + "/gamma"), cx.param(name + "/beta"), st, cx.training);
}

void init_mlp2(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
               Rng& rng, double out_gain) {
  init_linear(store, name + "/0", in, hidden, rng);
  init_linear(store, name + "/1", hidden, out, rng, out_gain);
}

ad::Var mlp2(Context& cx, const std::string& name, ad::Var x) {
  return linear(cx, name + "/1", ad::leaky_relu(linear(cx, name + "/0", x)));
}

}  // namespace g2s::nn
