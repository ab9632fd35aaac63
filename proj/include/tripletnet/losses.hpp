#pragma once

#include <array>
#include <vector>

#include "tripletnet/ops.hpp"
#include "tripletnet/tensor.hpp"

namespace tripletnet {

struct LossConfig {
  double margin = 2.0;
  double lambda = 1e-3;

  void validate() const {
    if (margin <= 0) throw ConfigError("loss margin must be positive");
    if (lambda < 0) throw ConfigError("loss lambda must be non-negative");
  }
};

/// Triplet ranking loss over one embedded triplet (vectors of equal
/// length): [m + d(p1,p2) - d(p1,n)]_+ + [m + d(p1,p2) - d(p2,n)]_+
/// with d the squared Euclidean distance. Returns a [1] tensor.
template <typename T>
Tensor<T> triplet_loss(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                       T margin, Tape<T>* tape = nullptr);

/// Mean triplet loss over a batch given as three [B,D] tensors whose
/// rows are aligned triplets.
template <typename T>
Tensor<T> batch_triplet_loss(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                             T margin, Tape<T>* tape = nullptr);

/// Mean over the batch of ||p||^2 + ||p'||^2 + ||n||^2.
template <typename T>
Tensor<T> embedding_regularizer(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                                Tape<T>* tape = nullptr);

template <typename T>
struct LossParts {
  Tensor<T> total;
  Tensor<T> batch;
  Tensor<T> reg;
};

/// batch_triplet_loss + lambda * embedding_regularizer, with the two
/// parts kept for logging. Gradient flows through both terms.
template <typename T>
LossParts<T> total_loss_parts(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                              const LossConfig& config, Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> total_loss(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                     const LossConfig& config, Tape<T>* tape = nullptr);

/// List-of-triplets forms; each entry holds three equal-length vectors.
template <typename T>
struct EmbeddedTriplet {
  Tensor<T> pos1, pos2, neg;
};

template <typename T>
Tensor<T> batch_triplet_loss(const std::vector<EmbeddedTriplet<T>>& batch, T margin,
                             Tape<T>* tape = nullptr);

template <typename T>
Tensor<T> embedding_regularizer(const std::vector<EmbeddedTriplet<T>>& batch,
                                Tape<T>* tape = nullptr);

/// Trainable head of the pairwise (Siamese) baseline: probability of
/// "same class" is sigmoid(w * d(a,b) + b).
template <typename T>
struct SiameseHead {
  Tensor<T> weight;  // [1]
  Tensor<T> bias;    // [1]

  /// w starts at -1 so a larger distance means a lower same-class
  /// probability from the first step.
  static SiameseHead init() {
    SiameseHead h;
    h.weight = Tensor<T>::from({1}, {T(-1)}, true);
    h.bias = Tensor<T>::from({1}, {T(0)}, true);
    return h;
  }
};

/// Binary cross-entropy of sigmoid(w * d(a,b) + b) against the label
/// (1 = same class) for a single pair of embeddings. Returns [1].
template <typename T>
Tensor<T> siamese_pair_loss(const Tensor<T>& a, const Tensor<T>& b, bool same_class,
                            SiameseHead<T>& head, Tape<T>* tape = nullptr);

/// Mean pairwise loss over aligned [B,D] towers.
template <typename T>
Tensor<T> siamese_batch_loss(const Tensor<T>& a, const Tensor<T>& b,
                             const std::vector<bool>& same_class, SiameseHead<T>& head,
                             Tape<T>* tape = nullptr);

}  // namespace tripletnet
