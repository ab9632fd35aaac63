#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tripletnet/checkpoint.hpp"
#include "tripletnet/dataset.hpp"
#include "tripletnet/losses.hpp"
#include "tripletnet/net.hpp"
#include "tripletnet/optim.hpp"
#include "tripletnet/sampler.hpp"

namespace tripletnet {

struct MetricsRow {
  int64_t iteration = 0;
  double lr = 0;
  double batch_loss = 0;
  double reg_loss = 0;
  double total_loss = 0;
  double wall_ms = 0;
  std::optional<double> val_accuracy;
};

/// Periodic validation callback; returns an episode accuracy.
using ValHook = std::function<double(Model<float>&)>;

/// Called after every completed iteration (progress reporting).
using ProgressFn = std::function<void(const MetricsRow&)>;

struct TrainOutput {
  Model<float> model;
  SiameseHead<float> head;  // meaningful for siamese runs
  std::vector<MetricsRow> metrics;
  std::string checkpoint_path;  // final model file when out_dir is set
};

struct ResumePoint {
  std::string model_path;
  std::string state_path;
};

enum class TrainPhase { kPretrain, kFinetune, kSiamese };

/// Seed of the batch consumed at `iteration`; stateless, so resumed
/// runs replay the identical batch stream.
uint64_t batch_seed_for(TrainPhase phase, uint64_t run_seed, int64_t iteration);

/// Pre-training on base classes: sample triplet batch -> augment ->
/// embed (train mode, three shared-weight towers) -> total loss ->
/// backward -> Adam with the halving schedule. Fully reproducible from
/// (dataset, config, seed); batch seeds derive from the iteration
/// index, so resumed runs replay identically.
TrainOutput train_triplet(const ClassIndexedDataset& base, const ArchConfig& arch,
                          const TrainConfig& cfg, const AugmentParams& aug,
                          const std::string& out_dir = "", const ValHook& val = nullptr,
                          const ResumePoint* resume = nullptr,
                          const ProgressFn& progress = nullptr);

/// Same loop over the half base / half one-shot-synthetic mixture,
/// starting from a trained checkpoint. The LR schedule continues from
/// cfg.schedule_offset; the optimizer state starts fresh.
TrainOutput finetune_triplet(const std::string& checkpoint_path, const ClassIndexedDataset& base,
                             const OneShotSet& oneshot, const TrainConfig& cfg,
                             const AugmentParams& aug, const std::string& out_dir = "",
                             const ValHook& val = nullptr, const ProgressFn& progress = nullptr);

/// Pairwise baseline: same architecture and budget, pair batches and
/// the sigmoid-of-distance cross-entropy head.
TrainOutput train_siamese(const ClassIndexedDataset& base, const ArchConfig& arch,
                          const TrainConfig& cfg, const AugmentParams& aug,
                          const std::string& out_dir = "", const ValHook& val = nullptr,
                          const ProgressFn& progress = nullptr);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows,
                       bool append = false);

std::vector<MetricsRow> read_metrics_csv(const std::string& path);

}  // namespace tripletnet
