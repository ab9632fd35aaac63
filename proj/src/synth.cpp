#include "tripletnet/synth.hpp"

#include <algorithm>
#include <cmath>

namespace tripletnet {

namespace {

void stamp(Tensor<float>& img, double x, double y, double radius) {
  const int h = img.dim(1), w = img.dim(2);
  const int x0 = std::max(0, int(std::floor(x - radius - 1)));
  const int x1 = std::min(w - 1, int(std::ceil(x + radius + 1)));
  const int y0 = std::max(0, int(std::floor(y - radius - 1)));
  const int y1 = std::min(h - 1, int(std::ceil(y + radius + 1)));
  for (int py = y0; py <= y1; ++py)
    for (int px = x0; px <= x1; ++px) {
      const double d2 = (px - x) * (px - x) + (py - y) * (py - y);
      const double v = std::exp(-d2 / (2.0 * radius * radius));
      float& dst = img.data()[int64_t(py) * w + px];
      dst = std::max(dst, float(v));
    }
}

void draw_stroke(Tensor<float>& img, Rng& rng) {
  const int h = img.dim(1), w = img.dim(2);
  // quadratic bezier with endpoints and control point inside the frame
  const double margin = 0.15;
  auto px = [&](double f) { return margin * w + f * (1 - 2 * margin) * (w - 1); };
  auto py = [&](double f) { return margin * h + f * (1 - 2 * margin) * (h - 1); };
  const double x0 = px(rng.uniform()), y0 = py(rng.uniform());
  const double x1 = px(rng.uniform()), y1 = py(rng.uniform());
  const double cx = px(rng.uniform()), cy = py(rng.uniform());
  const double radius = 0.5 + rng.uniform() * 0.04 * std::min(h, w);
  const int steps = 3 * std::max(h, w);
  for (int s = 0; s <= steps; ++s) {
    const double t = double(s) / steps;
    const double u = 1 - t;
    const double x = u * u * x0 + 2 * u * t * cx + t * t * x1;
    const double y = u * u * y0 + 2 * u * t * cy + t * t * y1;
    stamp(img, x, y, radius);
  }
}

}  // namespace

ClassIndexedDataset make_glyph_dataset(int num_classes, int images_per_class, int size,
                                       uint64_t seed, int first_class_id, double jitter_scale) {
  if (num_classes < 1 || images_per_class < 1 || size < 8)
    throw ValueError("make_glyph_dataset: bad geometry");
  if (jitter_scale <= 0) throw ValueError("make_glyph_dataset: jitter_scale must be positive");

  const float js = float(jitter_scale);
  AugmentParams jitter;
  jitter.shear_x = 0.08f * js;
  jitter.shear_y = 0.08f * js;
  jitter.rotation_deg = 8.0f * js;
  jitter.scale_min = 1.0f - 0.08f * js;
  jitter.scale_max = 1.0f + 0.08f * js;
  jitter.translation_frac = 0.04f * js;

  ClassIndexedDataset ds;
  ds.kind = ClassIndexedDataset::Kind::kAffineGray;
  ds.channels = 1;
  ds.height = size;
  ds.width = size;

  for (int c = 0; c < num_classes; ++c) {
    Rng class_rng(mix_seed(seed, uint64_t(c) * 2 + 1));
    Tensor<float> prototype({1, size, size});
    const int strokes = 2 + int(class_rng.uniform_int(3));
    for (int s = 0; s < strokes; ++s) draw_stroke(prototype, class_rng);

    ClassIndexedDataset::ClassEntry entry;
    entry.id = first_class_id + c;
    entry.name = "glyph-" + std::to_string(entry.id);
    for (int i = 0; i < images_per_class; ++i) {
      const uint64_t inst_seed = mix_seed(mix_seed(seed, uint64_t(c)), uint64_t(i));
      Tensor<float> img = affine_augment(prototype, jitter, inst_seed);
      Rng noise(mix_seed(inst_seed, 0x9015e));
      for (int64_t k = 0; k < img.numel(); ++k) {
        const double v = img.data()[k] + 0.02 * (noise.uniform() - 0.5);
        img.data()[k] = float(std::min(1.0, std::max(0.0, v)));
      }
      entry.images.push_back(std::move(img));
    }
    ds.classes.push_back(std::move(entry));
  }
  ds.validate();
  return ds;
}

}  // namespace tripletnet
