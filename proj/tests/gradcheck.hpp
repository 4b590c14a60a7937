#pragma once

// Central finite-difference oracle for gradient tests. Independent of the
// backward rules: it only evaluates the forward pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "procap/autodiff/tensor.hpp"

namespace procap::testing {

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
};

// Relative error, with near-zero pairs compared absolutely.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-7) return std::abs(analytic - numeric) < 1e-8 ? 0.0 : 1.0;
  return std::abs(analytic - numeric) / scale;
}

// `loss` builds a fresh graph over `params` and returns the scalar loss.
// Checks every entry (or `max_entries` random entries per parameter).
inline GradCheckResult check_gradients(
    ad::ParameterSet<double>& params,
    const std::function<ad::Tensor<double>(ad::Graph<double>&)>& loss, double h = 1e-4,
    std::size_t max_entries = 0, unsigned seed = 7) {
  params.zero_grad();
  {
    ad::Graph<double> g;
    auto l = loss(g);
    g.backward(l);
  }
  auto eval = [&] {
    ad::Graph<double> g;
    return loss(g).item();
  };
  std::mt19937 rng(seed);
  GradCheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter<double>& p = params[i];
    if (p.frozen) continue;
    std::vector<std::size_t> idx(p.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    if (max_entries != 0 && idx.size() > max_entries) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_entries);
    }
    for (std::size_t k : idx) {
      const double orig = p.value[k];
      p.value[k] = orig + h;
      const double up = eval();
      p.value[k] = orig - h;
      const double down = eval();
      p.value[k] = orig;
      const double numeric = (up - down) / (2 * h);
      res.max_rel_error = std::max(res.max_rel_error, relative_error(p.grad[k], numeric));
      ++res.checked;
    }
  }
  return res;
}

inline void fill_uniform(ad::Parameter<double>& p, std::mt19937& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : p.value) v = d(rng);
}

}  // namespace procap::testing
