#include "tripletnet/net.hpp"

#include <cmath>

namespace tripletnet {

ArchConfig ArchConfig::paper(int channels) {
  ArchConfig a;
  a.in_channels = channels;
  a.in_height = 105;
  a.in_width = 105;
  a.blocks = {{2, 64}, {2, 128}, {3, 256}, {3, 512}};
  a.embedding_dim = 1024;
  return a;
}

ArchConfig ArchConfig::small_preset() {
  ArchConfig a;
  a.in_channels = 1;
  a.in_height = 28;
  a.in_width = 28;
  a.blocks = {{1, 16}, {1, 32}, {2, 64}, {2, 128}};
  a.embedding_dim = 128;
  return a;
}

void ArchConfig::validate() const {
  if (in_channels < 1 || in_height < 1 || in_width < 1)
    throw ConfigError("arch: input shape extents must be positive");
  if (blocks.empty()) throw ConfigError("arch: at least one block required");
  for (const auto& [convs, filters] : blocks) {
    if (convs < 1) throw ConfigError("arch: every block needs at least one conv layer");
    if (filters < 1) throw ConfigError("arch: every block needs at least one filter");
  }
  if (embedding_dim < 1) throw ConfigError("arch: embedding_dim must be positive");
  const auto chain = spatial_chain();
  if (chain.back().first < 1 || chain.back().second < 1)
    throw ConfigError("arch: pooling chain collapses the spatial extent to zero");
}

std::vector<std::pair<int, int>> ArchConfig::spatial_chain() const {
  std::vector<std::pair<int, int>> chain;
  int h = in_height, w = in_width;
  chain.emplace_back(h, w);
  for (size_t b = 0; b + 1 < blocks.size(); ++b) {
    h = (h + 1) / 2;
    w = (w + 1) / 2;
    chain.emplace_back(h, w);
  }
  return chain;
}

int64_t ArchConfig::flat_dim() const {
  const auto chain = spatial_chain();
  return int64_t(blocks.back().second) * chain.back().first * chain.back().second;
}

template <typename T>
std::vector<NamedTensor<T>> Model<T>::parameters() {
  std::vector<NamedTensor<T>> out;
  for (size_t b = 0; b < blocks.size(); ++b) {
    for (size_t l = 0; l < blocks[b].size(); ++l) {
      const std::string base = "conv-" + std::to_string(b + 1) + "-" + std::to_string(l + 1);
      auto& unit = blocks[b][l];
      out.push_back({base + ".weight", unit.weight});
      out.push_back({base + ".bias", unit.bias});
      out.push_back({base + ".bn.gamma", unit.gamma});
      out.push_back({base + ".bn.beta", unit.beta});
    }
  }
  out.push_back({"fc-1.weight", fc_weight});
  out.push_back({"fc-1.bias", fc_bias});
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Model<T>::state_tensors() {
  std::vector<NamedTensor<T>> out;
  for (size_t b = 0; b < blocks.size(); ++b) {
    for (size_t l = 0; l < blocks[b].size(); ++l) {
      const std::string base = "conv-" + std::to_string(b + 1) + "-" + std::to_string(l + 1);
      auto& unit = blocks[b][l];
      out.push_back({base + ".bn.running_mean", unit.bn.running_mean});
      out.push_back({base + ".bn.running_var", unit.bn.running_var});
    }
  }
  return out;
}

template <typename T>
std::vector<std::string> Model<T>::layer_registry() const {
  std::vector<std::string> names;
  for (size_t b = 0; b < blocks.size(); ++b)
    for (size_t l = 0; l < blocks[b].size(); ++l)
      names.push_back("conv-" + std::to_string(b + 1) + "-" + std::to_string(l + 1));
  names.push_back("fc-1");
  return names;
}

template <typename T>
int64_t Model<T>::parameter_count() const {
  int64_t n = 0;
  for (const auto& block : blocks)
    for (const auto& unit : block)
      n += unit.weight.numel() + unit.bias.numel() + unit.gamma.numel() + unit.beta.numel();
  n += fc_weight.numel() + fc_bias.numel();
  return n;
}

template <typename T>
Model<T> build_network(const ArchConfig& arch) {
  arch.validate();
  Model<T> model;
  model.arch = arch;
  int in_c = arch.in_channels;
  for (const auto& [convs, filters] : arch.blocks) {
    std::vector<ConvUnit<T>> block;
    for (int l = 0; l < convs; ++l) {
      ConvUnit<T> unit;
      unit.weight = Tensor<T>({filters, in_c, 3, 3}, true);
      unit.bias = Tensor<T>({filters}, true);
      unit.gamma = Tensor<T>({filters}, true);
      unit.beta = Tensor<T>({filters}, true);
      unit.bn = BatchNormState<T>::init(filters);
      block.push_back(std::move(unit));
      in_c = filters;
    }
    model.blocks.push_back(std::move(block));
  }
  model.fc_weight = Tensor<T>({int(arch.flat_dim()), arch.embedding_dim}, true);
  model.fc_bias = Tensor<T>({arch.embedding_dim}, true);
  return model;
}

template <typename T>
void he_init(Model<T>& model, uint64_t seed) {
  uint64_t stream = 0;
  auto fill_normal = [&](Tensor<T>& t, double stddev) {
    Rng rng(mix_seed(seed, stream++));
    T* d = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) d[i] = T(stddev * rng.normal());
  };
  auto fill_const = [](Tensor<T>& t, T v) {
    T* d = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) d[i] = v;
  };
  for (auto& block : model.blocks) {
    for (auto& unit : block) {
      const double fan_in = double(unit.weight.dim(1)) * 9.0;
      fill_normal(unit.weight, std::sqrt(2.0 / fan_in));
      fill_const(unit.bias, T(0));
      fill_const(unit.gamma, T(1));
      fill_const(unit.beta, T(0));
      fill_const(unit.bn.running_mean, T(0));
      fill_const(unit.bn.running_var, T(1));
    }
  }
  fill_normal(model.fc_weight, std::sqrt(2.0 / double(model.fc_weight.dim(0))));
  fill_const(model.fc_bias, T(0));
}

namespace {

/// Runs the network, optionally stopping at a named conv layer and
/// returning that layer's raw conv output.
template <typename T>
Tensor<T> forward_impl(Model<T>& model, const Tensor<T>& images, Mode mode, Tape<T>* tape,
                       const std::string& stop_layer) {
  if (images.ndim() != 4) throw ShapeError("embed: images must be [N,C,H,W]");
  if (images.dim(1) != model.arch.in_channels || images.dim(2) != model.arch.in_height ||
      images.dim(3) != model.arch.in_width)
    throw ShapeError("embed: image shape does not match the network input shape");
  if (mode == Mode::kEval) tape = nullptr;

  Tensor<T> x = images;
  for (size_t b = 0; b < model.blocks.size(); ++b) {
    for (size_t l = 0; l < model.blocks[b].size(); ++l) {
      auto& unit = model.blocks[b][l];
      Tensor<T> c = conv2d(x, unit.weight, unit.bias, tape);
      if (!stop_layer.empty() &&
          stop_layer == "conv-" + std::to_string(b + 1) + "-" + std::to_string(l + 1))
        return c;
      x = relu(batchnorm(c, unit.gamma, unit.beta, unit.bn, mode, tape), tape);
    }
    if (b + 1 < model.blocks.size()) x = maxpool2d_ceil(x, tape);
  }
  x = flatten(x, tape);
  x = fully_connected(x, model.fc_weight, model.fc_bias, tape);
  return relu(x, tape);
}

}  // namespace

template <typename T>
Tensor<T> embed(Model<T>& model, const Tensor<T>& images, Mode mode, Tape<T>* tape) {
  return forward_impl(model, images, mode, tape, "");
}

template <typename T>
Tensor<T> layer_features_batch(Model<T>& model, const Tensor<T>& images, const std::string& layer) {
  if (layer == "fc-1") return embed(model, images, Mode::kEval);
  const auto registry = model.layer_registry();
  bool known = false;
  for (const auto& name : registry) known = known || name == layer;
  if (!known) throw ValueError("unknown layer name: " + layer);

  Tensor<T> fmap = forward_impl<T>(model, images, Mode::kEval, nullptr, layer);
  const int n = fmap.dim(0), c = fmap.dim(1);
  const int64_t spatial = int64_t(fmap.dim(2)) * fmap.dim(3);
  Tensor<T> out({n, c});
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const T* p = fmap.data() + (int64_t(i) * c + ch) * spatial;
      T best = p[0];
      for (int64_t k = 1; k < spatial; ++k) best = std::max(best, p[k]);
      out.data()[int64_t(i) * c + ch] = best;
    }
  }
  return out;
}

template <typename T>
std::vector<T> layer_features(Model<T>& model, const Tensor<T>& image, const std::string& layer) {
  if (image.ndim() != 3) throw ShapeError("layer_features: image must be [C,H,W]");
  Tensor<T> batch({1, image.dim(0), image.dim(1), image.dim(2)});
  std::copy(image.data(), image.data() + image.numel(), batch.data());
  Tensor<T> feats = layer_features_batch(model, batch, layer);
  return std::vector<T>(feats.data(), feats.data() + feats.numel());
}

#define TRIPLETNET_INSTANTIATE_NET(T)                                                           \
  template struct ConvUnit<T>;                                                                  \
  template class Model<T>;                                                                      \
  template Model<T> build_network<T>(const ArchConfig&);                                        \
  template void he_init<T>(Model<T>&, uint64_t);                                               \
  template Tensor<T> embed<T>(Model<T>&, const Tensor<T>&, Mode, Tape<T>*);                    \
  template std::vector<T> layer_features<T>(Model<T>&, const Tensor<T>&, const std::string&);  \
  template Tensor<T> layer_features_batch<T>(Model<T>&, const Tensor<T>&, const std::string&);

TRIPLETNET_INSTANTIATE_NET(float)
TRIPLETNET_INSTANTIATE_NET(double)

#undef TRIPLETNET_INSTANTIATE_NET

}  // namespace tripletnet
