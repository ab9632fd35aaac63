#pragma once

#include <string>
#include <vector>

#include "tripletnet/dataset.hpp"

namespace tripletnet {

/// One N-way 1-shot task: one support instance per class plus held-out
/// queries, all from novel classes. Support and query instances are
/// disjoint by construction.
struct Episode {
  int run_id = 0;
  int way = 0;
  std::vector<int> class_ids;              // size way, aligned with support
  std::vector<Tensor<float>> support;      // one image per class
  struct Query {
    Tensor<float> image;
    int true_class = 0;
  };
  std::vector<Query> queries;
};

/// Samples `runs` episodes: per run, `way` classes without
/// replacement, one support instance and `queries_per_class` disjoint
/// query instances per class. Deterministic per seed.
std::vector<Episode> build_episodes(const ClassIndexedDataset& novel, int way,
                                    int queries_per_class, int runs, uint64_t seed);

/// Episodes pinned to a fixed OneShotSet: supports come from the set,
/// queries from the (disjoint) pool. Used to evaluate fine-tuning on
/// exactly the one-shot instances it saw.
std::vector<Episode> build_episodes_from_oneshot(const OneShotSet& oneshot,
                                                 const ClassIndexedDataset& pool, int way,
                                                 int queries_per_class, int runs, uint64_t seed);

/// Loads pre-fixed evaluation runs laid out as
/// root/run*/ {training/,test/} image dirs plus a class_labels.txt of
/// "<test path> <training path>" lines (the distributed Omniglot
/// one-shot protocol). Grayscale images are ink-inverted like ingestion.
std::vector<Episode> load_fixed_episodes(const std::string& root, int downsample = 0);

}  // namespace tripletnet
