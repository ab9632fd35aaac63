#pragma once

#include <vector>

#include "tripletnet/dataset.hpp"

namespace tripletnet {

enum class TripletSource { kBase, kOneShot };

struct Triplet {
  Tensor<float> pos1, pos2, neg;
  TripletSource source = TripletSource::kBase;
  int pos_class = 0, neg_class = 0;
};

struct TripletBatch {
  std::vector<Triplet> items;
};

struct PairBatch {
  struct Pair {
    Tensor<float> a, b;
    bool same = false;
    int class_a = 0, class_b = 0;
  };
  std::vector<Pair> items;
};

/// Uniform triplet sampler over base classes: class uniform, two
/// distinct positive instances uniform, negative class uniform among
/// the others, negative instance uniform. Every image goes through the
/// dataset's augmentation. Classes drawn with fewer than two instances
/// are resampled. Deterministic per (inputs, seed).
TripletBatch sample_triplet_batch(const ClassIndexedDataset& base, const AugmentParams& params,
                                  int size, uint64_t seed);

/// Fine-tuning mixture: each triplet is, with probability one half, a
/// base triplet as above, and otherwise a one-shot triplet
/// (x_k, A(x_k), x_j) built from two distinct one-shot instances with
/// A the dataset's augmentation. Source tags are recorded.
TripletBatch sample_finetune_batch(const ClassIndexedDataset& base, const OneShotSet& oneshot,
                                   const AugmentParams& params, int size, uint64_t seed);

/// Alternating same/different pair sampler (ceil(size/2) same-class
/// pairs); images go through the dataset's augmentation.
PairBatch sample_pair_batch(const ClassIndexedDataset& ds, const AugmentParams& params, int size,
                            uint64_t seed);

/// Stacks batch images into [B,C,H,W] towers for the network.
Tensor<float> stack_images(const std::vector<Tensor<float>>& images);

}  // namespace tripletnet
