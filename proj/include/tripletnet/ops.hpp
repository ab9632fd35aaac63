#pragma once

#include <string>

#include "tripletnet/tensor.hpp"

namespace tripletnet {

enum class Mode { kTrain, kEval };

/// Per-channel running statistics of a batch normalization layer.
template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  static BatchNormState init(int channels) {
    BatchNormState s;
    s.running_mean = Tensor<T>::zeros({channels});
    s.running_var = Tensor<T>::full({channels}, T(1));
    return s;
  }
};

namespace debug {
/// Records how close a forward pass came to the non-smooth points of
/// relu and max-pool, so gradient-check drivers can reject inputs that
/// sit on a kink. Inactive (null) outside of tests.
struct KinkProbe {
  double min_relu_margin = 1e300;  // min |x| over relu inputs
  double min_pool_gap = 1e300;     // min (max - runner_up) over pool windows
};
KinkProbe* kink_probe();
void set_kink_probe(KinkProbe* probe);
}  // namespace debug

// Layer primitives. Every op computes its forward result and, when a
// tape is given and an input carries gradients, records a backward
// closure. Summation order is fixed and documented per op so results
// are reproducible and independent of the thread count.

/// 3x3 convolution, stride 1, padding 1 (same-size output).
/// input [N,C,H,W], weight [K,C,3,3], bias [K] -> [N,K,H,W].
/// Each output element sums bias first, then contributions in
/// ascending (input channel, kernel row, kernel col) order.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Tape<T>* tape = nullptr);

/// 2x2 stride-2 max pooling with ceil rounding: extent e -> ceil(e/2);
/// partial windows at the right/bottom edges pool over what is there.
/// Backward routes the gradient to the first (row-major) argmax.
template <typename T>
Tensor<T> maxpool2d_ceil(const Tensor<T>& input, Tape<T>* tape = nullptr);

/// Elementwise max(0, x); subgradient at 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& input, Tape<T>* tape = nullptr);

/// Batch normalization over all dims but the channel dim (dim 1).
/// Train mode normalizes by batch statistics (biased variance) and
/// updates the running stats by exponential moving average; eval mode
/// normalizes by the running stats. Train mode requires batch size >= 2.
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                    BatchNormState<T>& state, Mode mode, Tape<T>* tape = nullptr);

/// input [N,D] x weight [D,E] + bias [E] -> [N,E]. Each output element
/// sums bias first, then products in ascending input-dimension order.
template <typename T>
Tensor<T> fully_connected(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                          Tape<T>* tape = nullptr);

/// [N, ...] -> [N, rest].
template <typename T>
Tensor<T> flatten(const Tensor<T>& input, Tape<T>* tape = nullptr);

// Elementwise and reduction primitives used to compose losses.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> add_const(const Tensor<T>& a, T c, Tape<T>* tape = nullptr);

/// Sum of all elements -> [1], ascending index order.
template <typename T>
Tensor<T> sum(const Tensor<T>& a, Tape<T>* tape = nullptr);

/// Row sums of a [N,M] tensor -> [N], ascending column order.
template <typename T>
Tensor<T> row_sum(const Tensor<T>& a, Tape<T>* tape = nullptr);

/// Broadcast multiply / add of a single-element tensor over x.
template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, const Tensor<T>& s, Tape<T>* tape = nullptr);

/// Numerically stable elementwise binary cross-entropy on logits:
/// loss_i = max(z_i, 0) - z_i * y_i + log(1 + exp(-|z_i|)).
template <typename T>
Tensor<T> bce_with_logits(const Tensor<T>& logits, const std::vector<T>& targets,
                          Tape<T>* tape = nullptr);

}  // namespace tripletnet
