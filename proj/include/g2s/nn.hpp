#pragma once

// Layer helpers over the autodiff tape. Parameters are addressed by
// slash-separated names inside a ParameterStore.

#include <map>
#include <string>

#include "g2s/autodiff.hpp"

namespace g2s {
class Rng;
}

namespace g2s::nn {

/// One forward pass: where parameters come from and how they are bound.
struct Context {
  ad::Tape& tape;
  ad::ParameterStore& store;
  bool trainable = true;  // false binds parameters as constants
  bool training = true;   // batch-norm mode
  bool update_stats = true;  // let train-mode batch norm move its running statistics

  Context(ad::Tape& t, ad::ParameterStore& s, bool trainable_ = true, bool training_ = true)
      : tape(t), store(s), trainable(trainable_), training(training_) {}

  /// Tape leaf for a parameter, created once per context.
  ad::Var param(const std::string& name);

private:
  std::map<std::string, ad::Var> bound_;
};

void init_linear(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                 double gain = 1.0);
ad::Var linear(Context& cx, const std::string& name, ad::Var x);

void init_embedding(ad::ParameterStore& store, const std::string& name, std::size_t rows, std::size_t width, Rng& rng);
ad::Var embed(Context& cx, const std::string& name, std::span<const int> indices);

void init_batch_norm(ad::ParameterStore& store, const std::string& name, std::size_t width);
ad::Var batch_norm(Context& cx, const std::string& name, ad::Var x);

/// Linear -> leaky ReLU -> Linear.
void init_mlp2(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
               Rng& rng, double out_gain = 1.0);
ad::Var mlp2(Context& cx, const std::string& name, ad::Var x);

}  // namespace g2s::nn
