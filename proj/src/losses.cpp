#include "tripletnet/losses.hpp"

namespace tripletnet {

namespace {

/// Squared Euclidean distances between aligned rows: [B].
template <typename T>
Tensor<T> row_sq_dist(const Tensor<T>& a, const Tensor<T>& b, Tape<T>* tape) {
  Tensor<T> e = sub(a, b, tape);
  return row_sum(mul(e, e, tape), tape);
}

template <typename T>
void require_matrix_triplet(const Tensor<T>& p1, const Tensor<T>& p2, const Tensor<T>& n,
                            const char* op) {
  if (p1.ndim() != 2 || p2.ndim() != 2 || n.ndim() != 2)
    throw ShapeError(std::string(op) + ": expected [B,D] tensors");
  if (p1.shape() != p2.shape() || p1.shape() != n.shape())
    throw ShapeError(std::string(op) + ": embedding shapes do not match");
  if (p1.dim(0) < 1) throw ValueError(std::string(op) + ": empty batch");
}

/// Per-triplet hinge losses for aligned [B,D] rows: [B].
template <typename T>
Tensor<T> per_triplet_losses(const Tensor<T>& p1, const Tensor<T>& p2, const Tensor<T>& n,
                             T margin, Tape<T>* tape) {
  Tensor<T> d12 = row_sq_dist(p1, p2, tape);
  Tensor<T> d1n = row_sq_dist(p1, n, tape);
  Tensor<T> d2n = row_sq_dist(p2, n, tape);
  Tensor<T> h1 = relu(add_const(sub(d12, d1n, tape), margin, tape), tape);
  Tensor<T> h2 = relu(add_const(sub(d12, d2n, tape), margin, tape), tape);
  return add(h1, h2, tape);
}

}  // namespace

template <typename T>
Tensor<T> triplet_loss(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                       T margin, Tape<T>* tape) {
  if (pos1.ndim() != 1 || pos2.ndim() != 1 || neg.ndim() != 1)
    throw ShapeError("triplet_loss: embeddings must be vectors");
  if (pos1.numel() != pos2.numel() || pos1.numel() != neg.numel())
    throw ShapeError("triplet_loss: embedding lengths do not match");
  Tensor<T> e12 = sub(pos1, pos2, tape);
  Tensor<T> d12 = sum(mul(e12, e12, tape), tape);
  Tensor<T> e1n = sub(pos1, neg, tape);
  Tensor<T> d1n = sum(mul(e1n, e1n, tape), tape);
  Tensor<T> e2n = sub(pos2, neg, tape);
  Tensor<T> d2n = sum(mul(e2n, e2n, tape), tape);
  Tensor<T> h1 = relu(add_const(sub(d12, d1n, tape), margin, tape), tape);
  Tensor<T> h2 = relu(add_const(sub(d12, d2n, tape), margin, tape), tape);
  return add(h1, h2, tape);
}

template <typename T>
Tensor<T> batch_triplet_loss(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                             T margin, Tape<T>* tape) {
  require_matrix_triplet(pos1, pos2, neg, "batch_triplet_loss");
  Tensor<T> per = per_triplet_losses(pos1, pos2, neg, margin, tape);
  return scale(sum(per, tape), T(1) / T(pos1.dim(0)), tape);
}

template <typename T>
Tensor<T> embedding_regularizer(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                                Tape<T>* tape) {
  require_matrix_triplet(pos1, pos2, neg, "embedding_regularizer");
  Tensor<T> n1 = sum(mul(pos1, pos1, tape), tape);
  Tensor<T> n2 = sum(mul(pos2, pos2, tape), tape);
  Tensor<T> n3 = sum(mul(neg, neg, tape), tape);
  return scale(add(add(n1, n2, tape), n3, tape), T(1) / T(pos1.dim(0)), tape);
}

template <typename T>
LossParts<T> total_loss_parts(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                              const LossConfig& config, Tape<T>* tape) {
  config.validate();
  LossParts<T> parts;
  parts.batch = batch_triplet_loss(pos1, pos2, neg, T(config.margin), tape);
  parts.reg = embedding_regularizer(pos1, pos2, neg, tape);
  parts.total = add(parts.batch, scale(parts.reg, T(config.lambda), tape), tape);
  return parts;
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& pos1, const Tensor<T>& pos2, const Tensor<T>& neg,
                     const LossConfig& config, Tape<T>* tape) {
  return total_loss_parts(pos1, pos2, neg, config, tape).total;
}

template <typename T>
Tensor<T> batch_triplet_loss(const std::vector<EmbeddedTriplet<T>>& batch, T margin, Tape<T>* tape) {
  if (batch.empty()) throw ValueError("batch_triplet_loss: empty batch");
  Tensor<T> acc = triplet_loss(batch[0].pos1, batch[0].pos2, batch[0].neg, margin, tape);
  for (size_t i = 1; i < batch.size(); ++i)
    acc = add(acc, triplet_loss(batch[i].pos1, batch[i].pos2, batch[i].neg, margin, tape), tape);
  return scale(acc, T(1) / T(batch.size()), tape);
}

template <typename T>
Tensor<T> embedding_regularizer(const std::vector<EmbeddedTriplet<T>>& batch, Tape<T>* tape) {
  if (batch.empty()) throw ValueError("embedding_regularizer: empty batch");
  Tensor<T> acc;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    Tensor<T> n1 = sum(mul(t.pos1, t.pos1, tape), tape);
    Tensor<T> n2 = sum(mul(t.pos2, t.pos2, tape), tape);
    Tensor<T> n3 = sum(mul(t.neg, t.neg, tape), tape);
    Tensor<T> s = add(add(n1, n2, tape), n3, tape);
    acc = i == 0 ? s : add(acc, s, tape);
  }
  return scale(acc, T(1) / T(batch.size()), tape);
}

template <typename T>
Tensor<T> siamese_pair_loss(const Tensor<T>& a, const Tensor<T>& b, bool same_class,
                            SiameseHead<T>& head, Tape<T>* tape) {
  if (a.ndim() != 1 || b.ndim() != 1 || a.numel() != b.numel())
    throw ShapeError("siamese_pair_loss: embeddings must be equal-length vectors");
  Tensor<T> e = sub(a, b, tape);
  Tensor<T> d = sum(mul(e, e, tape), tape);
  Tensor<T> z = add_scalar(mul_scalar(d, head.weight, tape), head.bias, tape);
  return bce_with_logits(z, std::vector<T>{same_class ? T(1) : T(0)}, tape);
}

template <typename T>
Tensor<T> siamese_batch_loss(const Tensor<T>& a, const Tensor<T>& b,
                             const std::vector<bool>& same_class, SiameseHead<T>& head,
                             Tape<T>* tape) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape() != b.shape())
    throw ShapeError("siamese_batch_loss: expected matching [B,D] tensors");
  if (int64_t(same_class.size()) != a.dim(0))
    throw ShapeError("siamese_batch_loss: one label per pair required");
  if (a.dim(0) < 1) throw ValueError("siamese_batch_loss: empty batch");
  Tensor<T> d = row_sq_dist(a, b, tape);
  Tensor<T> z = add_scalar(mul_scalar(d, head.weight, tape), head.bias, tape);
  std::vector<T> targets(same_class.size());
  for (size_t i = 0; i < same_class.size(); ++i) targets[i] = same_class[i] ? T(1) : T(0);
  Tensor<T> per = bce_with_logits(z, targets, tape);
  return scale(sum(per, tape), T(1) / T(a.dim(0)), tape);
}

#define TRIPLETNET_INSTANTIATE_LOSSES(T)                                                         \
  template Tensor<T> triplet_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T,   \
                                     Tape<T>*);                                                  \
  template Tensor<T> batch_triplet_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,\
                                           T, Tape<T>*);                                         \
  template Tensor<T> embedding_regularizer<T>(const Tensor<T>&, const Tensor<T>&,               \
                                              const Tensor<T>&, Tape<T>*);                      \
  template LossParts<T> total_loss_parts<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,\
                                            const LossConfig&, Tape<T>*);                       \
  template Tensor<T> total_loss<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                   const LossConfig&, Tape<T>*);                                 \
  template Tensor<T> batch_triplet_loss<T>(const std::vector<EmbeddedTriplet<T>>&, T, Tape<T>*);\
  template Tensor<T> embedding_regularizer<T>(const std::vector<EmbeddedTriplet<T>>&, Tape<T>*);\
  template Tensor<T> siamese_pair_loss<T>(const Tensor<T>&, const Tensor<T>&, bool,             \
                                          SiameseHead<T>&, Tape<T>*);                           \
  template Tensor<T> siamese_batch_loss<T>(const Tensor<T>&, const Tensor<T>&,                  \
                                           const std::vector<bool>&, SiameseHead<T>&, Tape<T>*);

TRIPLETNET_INSTANTIATE_LOSSES(float)
TRIPLETNET_INSTANTIATE_LOSSES(double)

#undef TRIPLETNET_INSTANTIATE_LOSSES

}  // namespace tripletnet
