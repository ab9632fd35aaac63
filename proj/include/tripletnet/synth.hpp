#pragma once

#include "tripletnet/dataset.hpp"

namespace tripletnet {

/// Procedurally generated handwritten-character stand-in: each class
/// is a glyph of a few random strokes; instances are seeded affine
/// jitters of the class prototype plus light pixel noise. Useful for
/// tests and for running the full pipeline without a real character
/// corpus on disk. `jitter_scale` widens the instance transform ranges
/// (1 = mild, ~2 approaches handwriting-level intra-class variation).
ClassIndexedDataset make_glyph_dataset(int num_classes, int images_per_class, int size,
                                       uint64_t seed, int first_class_id = 0,
                                       double jitter_scale = 1.0);

}  // namespace tripletnet
