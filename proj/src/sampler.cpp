#include "tripletnet/sampler.hpp"

#include <algorithm>

namespace tripletnet {

namespace {

Tensor<float> augment_image(const ClassIndexedDataset& ds, const AugmentParams& params,
                            const Tensor<float>& img, Rng& rng) {
  if (ds.kind == ClassIndexedDataset::Kind::kNatural)
    return natural_augment(img, params, rng.next());
  return affine_augment(img, params, rng.next());
}

Tensor<float> identity_view(const ClassIndexedDataset& ds, const AugmentParams& params,
                            const Tensor<float>& img) {
  return eval_view(ds, img, params.crop_size);
}

void require_base_usable(const ClassIndexedDataset& base, const char* op) {
  if (base.classes.size() < 2)
    throw ValueError(std::string(op) + ": at least two base classes required");
  bool any_pairable = false;
  for (const auto& c : base.classes) any_pairable = any_pairable || c.images.size() >= 2;
  if (!any_pairable)
    throw ValueError(std::string(op) + ": no base class has two or more instances");
}

Triplet draw_base_triplet(const ClassIndexedDataset& base, const AugmentParams& params, Rng& rng) {
  const size_t n_classes = base.classes.size();
  size_t ci = 0;
  for (;;) {  // resample classes that cannot provide a positive pair
    ci = size_t(rng.uniform_int(uint64_t(n_classes)));
    if (base.classes[ci].images.size() >= 2) break;
  }
  const auto& pos_class = base.classes[ci];
  const size_t n = pos_class.images.size();
  const size_t i = size_t(rng.uniform_int(uint64_t(n)));
  size_t j = size_t(rng.uniform_int(uint64_t(n - 1)));
  if (j >= i) ++j;

  size_t nc = size_t(rng.uniform_int(uint64_t(n_classes - 1)));
  if (nc >= ci) ++nc;
  const auto& neg_class = base.classes[nc];
  const size_t k = size_t(rng.uniform_int(uint64_t(neg_class.images.size())));

  Triplet t;
  t.source = TripletSource::kBase;
  t.pos_class = pos_class.id;
  t.neg_class = neg_class.id;
  t.pos1 = augment_image(base, params, pos_class.images[i], rng);
  t.pos2 = augment_image(base, params, pos_class.images[j], rng);
  t.neg = augment_image(base, params, neg_class.images[k], rng);
  return t;
}

}  // namespace

TripletBatch sample_triplet_batch(const ClassIndexedDataset& base, const AugmentParams& params,
                                  int size, uint64_t seed) {
  if (size < 1) throw ValueError("sample_triplet_batch: size must be positive");
  require_base_usable(base, "sample_triplet_batch");
  params.validate();
  Rng rng(seed);
  TripletBatch batch;
  batch.items.reserve(size_t(size));
  for (int t = 0; t < size; ++t) batch.items.push_back(draw_base_triplet(base, params, rng));
  return batch;
}

TripletBatch sample_finetune_batch(const ClassIndexedDataset& base, const OneShotSet& oneshot,
                                   const AugmentParams& params, int size, uint64_t seed) {
  if (size < 1) throw ValueError("sample_finetune_batch: size must be positive");
  if (oneshot.items.size() < 2)
    throw ValueError("sample_finetune_batch: at least two one-shot instances required");
  require_base_usable(base, "sample_finetune_batch");
  params.validate();

  Rng rng(seed);
  TripletBatch batch;
  batch.items.reserve(size_t(size));
  for (int t = 0; t < size; ++t) {
    if (rng.bernoulli(0.5)) {
      const size_t n = oneshot.items.size();
      const size_t k = size_t(rng.uniform_int(uint64_t(n)));
      size_t j = size_t(rng.uniform_int(uint64_t(n - 1)));
      if (j >= k) ++j;
      Triplet tr;
      tr.source = TripletSource::kOneShot;
      tr.pos_class = oneshot.items[k].class_id;
      tr.neg_class = oneshot.items[j].class_id;
      tr.pos1 = identity_view(base, params, oneshot.items[k].image);
      tr.pos2 = augment_image(base, params, oneshot.items[k].image, rng);
      tr.neg = identity_view(base, params, oneshot.items[j].image);
      batch.items.push_back(std::move(tr));
    } else {
      batch.items.push_back(draw_base_triplet(base, params, rng));
    }
  }
  return batch;
}

PairBatch sample_pair_batch(const ClassIndexedDataset& ds, const AugmentParams& params, int size,
                            uint64_t seed) {
  if (size < 1) throw ValueError("sample_pair_batch: size must be positive");
  require_base_usable(ds, "sample_pair_batch");
  params.validate();

  Rng rng(seed);
  PairBatch batch;
  batch.items.reserve(size_t(size));
  const size_t n_classes = ds.classes.size();
  for (int t = 0; t < size; ++t) {
    PairBatch::Pair pair;
    pair.same = (t % 2) == 0;  // ceil(size/2) same-class pairs
    if (pair.same) {
      size_t ci = 0;
      for (;;) {
        ci = size_t(rng.uniform_int(uint64_t(n_classes)));
        if (ds.classes[ci].images.size() >= 2) break;
      }
      const auto& cls = ds.classes[ci];
      const size_t n = cls.images.size();
      const size_t i = size_t(rng.uniform_int(uint64_t(n)));
      size_t j = size_t(rng.uniform_int(uint64_t(n - 1)));
      if (j >= i) ++j;
      pair.class_a = pair.class_b = cls.id;
      pair.a = augment_image(ds, params, cls.images[i], rng);
      pair.b = augment_image(ds, params, cls.images[j], rng);
    } else {
      const size_t ca = size_t(rng.uniform_int(uint64_t(n_classes)));
      size_t cb = size_t(rng.uniform_int(uint64_t(n_classes - 1)));
      if (cb >= ca) ++cb;
      const auto& a_cls = ds.classes[ca];
      const auto& b_cls = ds.classes[cb];
      pair.class_a = a_cls.id;
      pair.class_b = b_cls.id;
      const size_t ia = size_t(rng.uniform_int(uint64_t(a_cls.images.size())));
      pair.a = augment_image(ds, params, a_cls.images[ia], rng);
      const size_t ib = size_t(rng.uniform_int(uint64_t(b_cls.images.size())));
      pair.b = augment_image(ds, params, b_cls.images[ib], rng);
    }
    batch.items.push_back(std::move(pair));
  }
  return batch;
}

Tensor<float> stack_images(const std::vector<Tensor<float>>& images) {
  if (images.empty()) throw ValueError("stack_images: empty batch");
  const auto& first = images.front();
  if (first.ndim() != 3) throw ShapeError("stack_images: images must be [C,H,W]");
  Tensor<float> out({int(images.size()), first.dim(0), first.dim(1), first.dim(2)});
  const int64_t stride = first.numel();
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != first.shape()) throw ShapeError("stack_images: ragged image shapes");
    std::copy(images[i].data(), images[i].data() + stride, out.data() + int64_t(i) * stride);
  }
  return out;
}

}  // namespace tripletnet
