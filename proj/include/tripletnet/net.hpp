#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tripletnet/ops.hpp"
#include "tripletnet/tensor.hpp"

namespace tripletnet {

/// Block-structured embedding CNN configuration. Blocks are separated
/// by 2x2 stride-2 ceil-mode max pooling (no pool after the last
/// block); every conv layer is conv -> batchnorm -> relu; the flattened
/// last block feeds a fully connected layer with relu on top.
struct ArchConfig {
  int in_channels = 1;
  int in_height = 105;
  int in_width = 105;
  std::vector<std::pair<int, int>> blocks;  // (conv layers, filters)
  int embedding_dim = 1024;

  /// Four blocks of (2,2,3,3) conv layers with 64/128/256/512 filters,
  /// 105x105 input, 1024-d embedding.
  static ArchConfig paper(int channels = 1);

  /// Laptop-sized variant for 28x28 inputs: blocks (1,16) (1,32)
  /// (2,64) (2,128), 128-d embedding. Same structure, smaller tensors.
  static ArchConfig small_preset();

  void validate() const;

  /// Spatial extents (h, w) entering each block, plus the final extent.
  std::vector<std::pair<int, int>> spatial_chain() const;

  /// Flattened size of the last block's output.
  int64_t flat_dim() const;

  bool operator==(const ArchConfig&) const = default;
};

/// One conv layer with its batch normalization parameters and state.
template <typename T>
struct ConvUnit {
  Tensor<T> weight;  // [K,C,3,3]
  Tensor<T> bias;    // [K]
  Tensor<T> gamma;   // [K]
  Tensor<T> beta;    // [K]
  BatchNormState<T> bn;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// The embedding network f: image -> non-negative feature vector.
template <typename T>
class Model {
 public:
  ArchConfig arch;
  std::vector<std::vector<ConvUnit<T>>> blocks;
  Tensor<T> fc_weight;  // [flat, embedding_dim]
  Tensor<T> fc_bias;    // [embedding_dim]

  /// Trainable tensors in forward order, named "conv-{block}-{index}.*"
  /// and "fc-1.*".
  std::vector<NamedTensor<T>> parameters();

  /// Batch-normalization running statistics, named alongside parameters.
  std::vector<NamedTensor<T>> state_tensors();

  /// Conv layers in forward order ("conv-1-1", ...), then "fc-1".
  std::vector<std::string> layer_registry() const;

  int64_t parameter_count() const;
};

template <typename T>
Model<T> build_network(const ArchConfig& arch);

/// Weights ~ normal(0, sqrt(2/n)) with n the number of input
/// connections of the unit (conv: in_channels*9, fc: flattened input
/// size); biases and beta 0, gamma 1. Deterministic per seed.
template <typename T>
void he_init(Model<T>& model, uint64_t seed);

/// Full forward pass over a [N,C,H,W] batch -> [N, embedding_dim].
/// Train mode uses batch BN statistics and records onto the tape; eval
/// mode uses running statistics and records nothing.
template <typename T>
Tensor<T> embed(Model<T>& model, const Tensor<T>& images, Mode mode, Tape<T>* tape = nullptr);

/// Per-channel spatial max of the named conv layer's output (the conv
/// result itself, before BN/relu) for one [C,H,W] image; "fc-1" returns
/// the embedding. Eval mode.
template <typename T>
std::vector<T> layer_features(Model<T>& model, const Tensor<T>& image, const std::string& layer);

/// Batch variant: [N,C,H,W] -> [N, channels_of(layer)].
template <typename T>
Tensor<T> layer_features_batch(Model<T>& model, const Tensor<T>& images, const std::string& layer);

}  // namespace tripletnet
