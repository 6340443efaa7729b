#pragma once

#include <cmath>
#include <vector>

#include "vgcnfuse/tensor.hpp"

namespace vgcnfuse {

// Adam with decoupled weight decay (the decay term never enters the
// moment estimates; it is subtracted as lr * weight_decay * param).
template <typename S>
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  long step = 0;

  std::vector<std::vector<S>> m;
  std::vector<std::vector<S>> v;

  void init(const std::vector<Tensor<S>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.emplace_back(p.numel(), S(0));
      v.emplace_back(p.numel(), S(0));
    }
    step = 0;
  }
};

template <typename S>
void adam_step(AdamState<S>& state, std::vector<Tensor<S>>& params) {
  if (state.m.size() != params.size())
    throw ShapeMismatch("adam state not initialized for this parameter list");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi].data();
    auto& g = params[pi].grad();
    auto& m = state.m[pi];
    auto& v = state.v[pi];
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = static_cast<S>(state.beta1 * m[i] + (1.0 - state.beta1) * g[i]);
      v[i] = static_cast<S>(state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i]);
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      double update = state.lr * mhat / (std::sqrt(vhat) + state.eps);
      if (state.weight_decay != 0.0) update += state.lr * state.weight_decay * p[i];
      p[i] -= static_cast<S>(update);
    }
  }
}

}  // namespace vgcnfuse
