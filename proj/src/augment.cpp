#include "tripletnet/augment.hpp"

#include <cmath>

namespace tripletnet {

void AugmentParams::validate() const {
  if (shear_x < 0 || shear_y < 0 || rotation_deg < 0 || translation_frac < 0)
    throw ConfigError("augment: range half-widths must be non-negative");
  if (scale_min <= 0 || scale_max < scale_min) throw ConfigError("augment: bad scale range");
  if (crop_size < 1) throw ConfigError("augment: crop size must be positive");
  if (flip_prob < 0 || flip_prob > 1) throw ConfigError("augment: flip probability out of range");
  if (contrast_min <= 0 || contrast_max < contrast_min)
    throw ConfigError("augment: bad contrast range");
}

AffineCoeffs sample_affine(const AugmentParams& params, int height, int width, Rng& rng) {
  params.validate();
  const double sx = rng.uniform(-params.shear_x, params.shear_x);
  const double sy = rng.uniform(-params.shear_y, params.shear_y);
  const double rot = rng.uniform(-params.rotation_deg, params.rotation_deg) * M_PI / 180.0;
  const double s = rng.uniform(params.scale_min, params.scale_max);
  const double tx = rng.uniform(-params.translation_frac, params.translation_frac) * width;
  const double ty = rng.uniform(-params.translation_frac, params.translation_frac) * height;

  // M = scale * rotation * shear, applied about the image center
  const double cr = std::cos(rot), sr = std::sin(rot);
  const double m00 = s * (cr - sr * sy), m01 = s * (cr * sx - sr);
  const double m10 = s * (sr + cr * sy), m11 = s * (sr * sx + cr);

  const double cx = (width - 1) / 2.0, cy = (height - 1) / 2.0;
  AffineCoeffs c;
  c.m00 = float(m00);
  c.m01 = float(m01);
  c.m10 = float(m10);
  c.m11 = float(m11);
  c.tx = float(cx + tx - (m00 * cx + m01 * cy));
  c.ty = float(cy + ty - (m10 * cx + m11 * cy));
  return c;
}

Tensor<float> affine_apply(const Tensor<float>& image, const AffineCoeffs& c) {
  if (image.ndim() != 3) throw ShapeError("affine_apply: image must be [C,H,W]");
  const int ch = image.dim(0), h = image.dim(1), w = image.dim(2);

  const double det = double(c.m00) * c.m11 - double(c.m01) * c.m10;
  if (std::abs(det) < 1e-12) throw ValueError("affine_apply: singular transform");
  const double i00 = c.m11 / det, i01 = -c.m01 / det;
  const double i10 = -c.m10 / det, i11 = c.m00 / det;

  Tensor<float> out({ch, h, w});
  const int64_t plane = int64_t(h) * w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - c.tx, dy = y - c.ty;
      const double fx = i00 * dx + i01 * dy;
      const double fy = i10 * dx + i11 * dy;
      const int x0 = int(std::floor(fx)), y0 = int(std::floor(fy));
      const double ax = fx - x0, ay = fy - y0;
      for (int k = 0; k < ch; ++k) {
        const float* src = image.data() + k * plane;
        auto at = [&](int yy, int xx) -> double {
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;  // background fill
          return src[int64_t(yy) * w + xx];
        };
        const double v = (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                         ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
        out.data()[k * plane + int64_t(y) * w + x] = float(v);
      }
    }
  }
  return out;
}

Tensor<float> affine_augment(const Tensor<float>& image, const AugmentParams& params,
                             uint64_t seed) {
  if (image.ndim() != 3) throw ShapeError("affine_augment: image must be [C,H,W]");
  Rng rng(seed);
  return affine_apply(image, sample_affine(params, image.dim(1), image.dim(2), rng));
}

Tensor<float> center_crop(const Tensor<float>& image, int size) {
  if (image.ndim() != 3) throw ShapeError("center_crop: image must be [C,H,W]");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h < size || w < size) throw ValueError("center_crop: image smaller than the crop");
  const int oy = (h - size) / 2, ox = (w - size) / 2;
  Tensor<float> out({c, size, size});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        out.data()[(int64_t(k) * size + y) * size + x] =
            image.data()[(int64_t(k) * h + oy + y) * w + ox + x];
  return out;
}

Tensor<float> horizontal_flip(const Tensor<float>& image) {
  if (image.ndim() != 3) throw ShapeError("horizontal_flip: image must be [C,H,W]");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor<float> out({c, h, w});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.data()[(int64_t(k) * h + y) * w + x] = image.data()[(int64_t(k) * h + y) * w + (w - 1 - x)];
  return out;
}

Tensor<float> natural_augment(const Tensor<float>& image, const AugmentParams& params,
                              uint64_t seed) {
  params.validate();
  if (image.ndim() != 3) throw ShapeError("natural_augment: image must be [C,H,W]");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const int size = params.crop_size;
  if (h < size || w < size) throw ValueError("natural_augment: image smaller than the crop");

  Rng rng(seed);
  const int ox = int(rng.uniform_int(uint64_t(w - size + 1)));
  const int oy = int(rng.uniform_int(uint64_t(h - size + 1)));
  const bool flip = rng.bernoulli(params.flip_prob);
  const float factor = float(rng.uniform(params.contrast_min, params.contrast_max));

  Tensor<float> out({c, size, size});
  for (int k = 0; k < c; ++k)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const int sx = flip ? ox + (size - 1 - x) : ox + x;
        out.data()[(int64_t(k) * size + y) * size + x] =
            image.data()[(int64_t(k) * h + oy + y) * w + sx];
      }

  double mean = 0;
  for (int64_t i = 0; i < out.numel(); ++i) mean += out.data()[i];
  mean /= double(out.numel());
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = mean + factor * (out.data()[i] - mean);
    out.data()[i] = float(std::min(1.0, std::max(0.0, v)));
  }
  return out;
}

Tensor<float> bilinear_resize(const Tensor<float>& image, int out_h, int out_w) {
  if (image.ndim() != 3) throw ShapeError("bilinear_resize: image must be [C,H,W]");
  if (out_h < 1 || out_w < 1) throw ValueError("bilinear_resize: bad output size");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor<float> out({c, out_h, out_w});
  const double sy = double(h) / out_h, sx = double(w) / out_w;
  const int64_t in_plane = int64_t(h) * w, out_plane = int64_t(out_h) * out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = int(std::floor(fy));
    const double ay = fy - y0;
    const int y0c = std::min(std::max(y0, 0), h - 1);
    const int y1c = std::min(std::max(y0 + 1, 0), h - 1);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = int(std::floor(fx));
      const double ax = fx - x0;
      const int x0c = std::min(std::max(x0, 0), w - 1);
      const int x1c = std::min(std::max(x0 + 1, 0), w - 1);
      for (int k = 0; k < c; ++k) {
        const float* src = image.data() + k * in_plane;
        const double v =
            (1 - ay) * ((1 - ax) * src[int64_t(y0c) * w + x0c] + ax * src[int64_t(y0c) * w + x1c]) +
            ay * ((1 - ax) * src[int64_t(y1c) * w + x0c] + ax * src[int64_t(y1c) * w + x1c]);
        out.data()[k * out_plane + int64_t(y) * out_w + x] = float(v);
      }
    }
  }
  return out;
}

}  // namespace tripletnet
