#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tripletnet/net.hpp"
#include "tripletnet/tensor.hpp"

namespace tripletnet {

/// Adam accumulators, one pair per parameter, in parameter order.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  int64_t t = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);

  template <typename NamedRange>
  static AdamState init(const NamedRange& params) {
    AdamState s;
    for (const auto& nt : params) {
      s.m.push_back(Tensor<T>::zeros(nt.tensor.shape()));
      s.v.push_back(Tensor<T>::zeros(nt.tensor.shape()));
    }
    return s;
  }
};

/// One Adam update with bias correction over named parameters, reading
/// each parameter's accumulated gradient. Throws NumericError naming
/// the parameter if a gradient is not finite.
template <typename T>
void adam_step(std::vector<NamedTensor<T>>& params, AdamState<T>& state, T lr);

struct TrainConfig {
  double initial_lr = 1e-4;
  int64_t lr_halving_period = 10000;
  int batch_size = 64;
  int64_t max_iterations = 0;
  double lambda = 1e-3;
  double margin = 2.0;
  uint64_t seed = 0;
  int64_t checkpoint_every = 0;    // 0 = only the final checkpoint
  int64_t eval_every = 0;          // 0 = no validation during training
  int64_t schedule_offset = 0;     // lr schedule starts at this iteration
  bool deterministic = false;      // single-threaded kernels, wall_ms = 0

  void validate() const;
};

/// Stepwise halving: initial_lr * 0.5^floor(iteration / period).
double lr_schedule(const TrainConfig& cfg, int64_t iteration);

}  // namespace tripletnet
