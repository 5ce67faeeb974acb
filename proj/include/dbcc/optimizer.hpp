#pragma once

#include <cmath>
#include <vector>

#include "dbcc/blocks.hpp"

namespace dbcc {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Per-parameter first/second moment estimates plus the shared step counter.
template <typename T>
struct AdamState {
  std::vector<TensorT<T>> m;
  std::vector<TensorT<T>> v;
  long long step = 0;

  static AdamState init(const ParamStore<T>& params) {
    AdamState s;
    for (int i = 0; i < params.size(); ++i) {
      s.m.push_back(TensorT<T>(params[i].value.shape()));
      s.v.push_back(TensorT<T>(params[i].value.shape()));
    }
    return s;
  }
};

template <typename T>
double global_grad_norm(const std::vector<TensorT<T>>& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (long long i = 0; i < g.size(); ++i) sq += static_cast<double>(g[i]) * g[i];
  return std::sqrt(sq);
}

/// Scales all gradients so the global L2 norm is at most max_norm.
template <typename T>
void clip_global_norm(std::vector<TensorT<T>>& grads, double max_norm) {
  const double n = global_grad_norm(grads);
  if (n <= max_norm || n == 0.0) return;
  const T s = static_cast<T>(max_norm / n);
  for (auto& g : grads)
    for (long long i = 0; i < g.size(); ++i) g[i] *= s;
}

/// Standard bias-corrected Adam update, in place.
template <typename T>
void adam_step(ParamStore<T>& params, const std::vector<TensorT<T>>& grads,
               AdamState<T>& state, const AdamConfig& cfg) {
  detail::require(static_cast<int>(grads.size()) == params.size(),
                  "adam_step: gradient list does not match parameter store");
  for (size_t i = 0; i < grads.size(); ++i)
    grads[i].check_finite("adam_step gradient");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (int p = 0; p < params.size(); ++p) {
    TensorT<T>& w = params[p].value;
    const TensorT<T>& g = grads[static_cast<size_t>(p)];
    detail::require(g.shape() == w.shape(), "adam_step: gradient shape mismatch for " + params[p].name);
    TensorT<T>& m = state.m[static_cast<size_t>(p)];
    TensorT<T>& v = state.v[static_cast<size_t>(p)];
    for (long long i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      w[i] = static_cast<T>(w[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace dbcc
