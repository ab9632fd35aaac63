#pragma once

#include "tripletnet/common.hpp"
#include "tripletnet/tensor.hpp"

namespace tripletnet {

/// Sampling ranges for the two augmentation families. Affine ranges
/// apply to grayscale character images; crop/flip/contrast to natural
/// images. Sampled parameters are uniform within each range.
struct AugmentParams {
  float shear_x = 0.3f;            // +- horizontal shear factor
  float shear_y = 0.3f;            // +- vertical shear factor
  float rotation_deg = 15.0f;      // +- degrees
  float scale_min = 0.8f;
  float scale_max = 1.2f;
  float translation_frac = 0.1f;   // +- fraction of each extent

  int crop_size = 105;
  float flip_prob = 0.5f;
  float contrast_min = 0.7f;
  float contrast_max = 1.3f;

  void validate() const;
};

/// Forward 2x3 affine map: p_out = M * p_in + t, in pixel coordinates.
struct AffineCoeffs {
  float m00 = 1, m01 = 0, m10 = 0, m11 = 1;
  float tx = 0, ty = 0;

  static AffineCoeffs identity() { return {}; }
};

/// Composes shear -> rotate -> scale -> translate about the image
/// center; parameter order of draws: shear_x, shear_y, rotation,
/// scale, translate_x, translate_y.
AffineCoeffs sample_affine(const AugmentParams& params, int height, int width, Rng& rng);

/// Bilinear resampling under the inverse of `coeffs`; out-of-bounds
/// reads fill with 0. Output shape equals input shape.
Tensor<float> affine_apply(const Tensor<float>& image, const AffineCoeffs& coeffs);

/// Seeded convenience wrapper over sample_affine + affine_apply.
Tensor<float> affine_augment(const Tensor<float>& image, const AugmentParams& params,
                             uint64_t seed);

/// Natural-image augmentation: random crop_size crop, horizontal flip
/// with flip_prob, contrast scaling about the per-image mean, clamped
/// to [0,1]. Draw order: crop x, crop y, flip, contrast.
Tensor<float> natural_augment(const Tensor<float>& image, const AugmentParams& params,
                              uint64_t seed);

Tensor<float> center_crop(const Tensor<float>& image, int size);

Tensor<float> horizontal_flip(const Tensor<float>& image);

/// Bilinear resize of a [C,H,W] image (align-corners-free convention).
Tensor<float> bilinear_resize(const Tensor<float>& image, int out_h, int out_w);

}  // namespace tripletnet
