#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "procap/autodiff/tensor.hpp"

namespace procap::ad {

template <class T>
struct AdamState {
  T lr = T(0.001);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  std::uint64_t t = 0;
  // Moments keyed by parameter name; frozen parameters never get an entry.
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> v;
};

struct AdamStepStats {
  double grad_norm = 0;  // global norm before clipping
  double clip_scale = 1;
};

// Clips the global gradient norm of all non-frozen parameters to `clip_norm`
// (disabled when <= 0), then applies one bias-corrected Adam update.
template <class T>
AdamStepStats adam_step(ParameterSet<T>& params, AdamState<T>& state, double clip_norm) {
  AdamStepStats stats;
  double sq = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter<T>& p = params[i];
    if (p.frozen) continue;
    for (T gv : p.grad) {
      if (!std::isfinite(gv)) throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
      sq += double(gv) * double(gv);
    }
  }
  stats.grad_norm = std::sqrt(sq);
  if (clip_norm > 0 && stats.grad_norm > clip_norm) stats.clip_scale = clip_norm / stats.grad_norm;

  ++state.t;
  const double bc1 = 1.0 - std::pow(double(state.beta1), double(state.t));
  const double bc2 = 1.0 - std::pow(double(state.beta2), double(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = params[i];
    if (p.frozen) continue;
    auto& m = state.m[p.name];
    auto& v = state.v[p.name];
    if (m.size() != p.size()) m.assign(p.size(), T(0));
    if (v.size() != p.size()) v.assign(p.size(), T(0));
    for (std::size_t k = 0; k < p.size(); ++k) {
      const T gk = static_cast<T>(p.grad[k] * stats.clip_scale);
      m[k] = state.beta1 * m[k] + (T(1) - state.beta1) * gk;
      v[k] = state.beta2 * v[k] + (T(1) - state.beta2) * gk * gk;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p.value[k] -= static_cast<T>(state.lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
  return stats;
}

}  // namespace procap::ad
