#include "tripletnet/optim.hpp"

#include <cmath>

namespace tripletnet {

template <typename T>
void adam_step(std::vector<NamedTensor<T>>& params, AdamState<T>& state, T lr) {
  if (params.size() != state.m.size() || params.size() != state.v.size())
    throw ValueError("adam_step: state does not match the parameter list");
  if (!(lr > 0)) throw ValueError("adam_step: learning rate must be positive");

  state.t += 1;
  const T bc1 = T(1) - T(std::pow(double(state.beta1), double(state.t)));
  const T bc2 = T(1) - T(std::pow(double(state.beta2), double(state.t)));

  for (size_t p = 0; p < params.size(); ++p) {
    auto& tensor = params[p].tensor;
    if (tensor.shape() != state.m[p].shape())
      throw ValueError("adam_step: accumulator shape mismatch for " + params[p].name);
    const T* g = tensor.grad_data();
    if (!g) continue;  // no gradient reached this parameter
    T* w = tensor.data();
    T* m = state.m[p].data();
    T* v = state.v[p].data();
    const int64_t n = tensor.numel();
    for (int64_t i = 0; i < n; ++i) {
      if (!std::isfinite(double(g[i])))
        throw NumericError("non-finite gradient in " + params[p].name);
      m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * g[i] * g[i];
      const T mhat = m[i] / bc1;
      const T vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (!(initial_lr > 0)) throw ConfigError("train: initial_lr must be positive");
  if (lr_halving_period < 1) throw ConfigError("train: lr_halving_period must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
  if (max_iterations < 0) throw ConfigError("train: max_iterations must be non-negative");
  if (lambda < 0) throw ConfigError("train: lambda must be non-negative");
  if (!(margin > 0)) throw ConfigError("train: margin must be positive");
  if (checkpoint_every < 0 || eval_every < 0 || schedule_offset < 0)
    throw ConfigError("train: negative interval");
}

double lr_schedule(const TrainConfig& cfg, int64_t iteration) {
  if (iteration < 0) throw ValueError("lr_schedule: iteration must be non-negative");
  const int64_t halvings = iteration / cfg.lr_halving_period;
  return cfg.initial_lr * std::pow(0.5, double(halvings));
}

template void adam_step<float>(std::vector<NamedTensor<float>>&, AdamState<float>&, float);
template void adam_step<double>(std::vector<NamedTensor<double>>&, AdamState<double>&, double);

}  // namespace tripletnet
