#pragma once

#include <cmath>
#include <map>

#include "newscap/tape.hpp"

namespace newscap::nn {

// Bias-corrected Adam with decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
template <typename S>
struct AdamStateT {
  struct Slot {
    TensorT<S> m, v;
  };
  std::map<std::string, Slot> slots;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

template <typename S>
void adam_step(ParamStoreT<S>& params, AdamStateT<S>& state, double lr, double weight_decay) {
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (auto& [name, e] : params.entries) {
    auto [it, fresh] = state.slots.try_emplace(name);
    if (fresh) {
      it->second.m = TensorT<S>(e.value.n_rows, e.value.n_cols);
      it->second.v = TensorT<S>(e.value.n_rows, e.value.n_cols);
    }
    auto& slot = it->second;
    check_same_shape(e.value, e.grad, "adam grad");
    check_same_shape(e.value, slot.m, "adam state");
    for (size_t i = 0; i < e.value.v.size(); ++i) {
      double g = double(e.grad.v[i]);
      double m = state.beta1 * double(slot.m.v[i]) + (1.0 - state.beta1) * g;
      double v = state.beta2 * double(slot.v.v[i]) + (1.0 - state.beta2) * g * g;
      slot.m.v[i] = S(m);
      slot.v.v[i] = S(v);
      double update = (m / bc1) / (std::sqrt(v / bc2) + state.eps);
      e.value.v[i] = S(double(e.value.v[i]) - lr * (update + weight_decay * double(e.value.v[i])));
    }
  }
}

// Linear warmup 0->lr over warmup_steps, then linear decay lr->0 over the
// remainder of the run. step is 1-based.
inline double scheduled_lr(double peak_lr, long step, long warmup_steps, long total_steps) {
  if (step <= 0) return 0.0;
  if (warmup_steps > 0 && step <= warmup_steps) return peak_lr * double(step) / double(warmup_steps);
  if (total_steps <= warmup_steps) return peak_lr;
  double frac = double(step - warmup_steps) / double(total_steps - warmup_steps);
  return peak_lr * std::max(0.0, 1.0 - frac);
}

using AdamState = AdamStateT<float>;

}  // namespace newscap::nn
