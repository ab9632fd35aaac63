#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tripletnet/net.hpp"

namespace tripletnet {

/// Versioned binary model container (magic "TNCK"). Holds the
/// architecture, a kind tag ("triplet" or "siamese"), and every named
/// tensor: trainable parameters, BN running statistics, and any extra
/// tensors (e.g. the Siamese head). Round trips are bit-exact; files
/// are written atomically (temp file + rename).
template <typename T>
struct LoadedModel {
  Model<T> model;
  std::string kind;
  std::vector<NamedTensor<T>> extra;
};

template <typename T>
void save_model(const std::string& path, Model<T>& model, const std::string& kind = "triplet",
                const std::vector<NamedTensor<T>>& extra = {});

template <typename T>
LoadedModel<T> load_model(const std::string& path);

/// Optimizer/iteration sidecar (magic "TNRS") used to resume training.
template <typename T>
struct RunState {
  int64_t next_iteration = 0;
  int64_t adam_t = 0;
  std::vector<NamedTensor<T>> moment1;
  std::vector<NamedTensor<T>> moment2;
};

template <typename T>
void save_run_state(const std::string& path, const RunState<T>& state);

template <typename T>
RunState<T> load_run_state(const std::string& path);

}  // namespace tripletnet
