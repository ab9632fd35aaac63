#pragma once

#include <span>
#include <string>
#include <vector>

#include "tripletnet/episodes.hpp"
#include "tripletnet/net.hpp"

namespace tripletnet {

struct SupportEmbedding {
  int class_id = 0;
  std::vector<float> vec;
};

/// Nearest neighbour over squared Euclidean distance; exact ties go to
/// the smallest class id.
int predict_nn(const std::vector<SupportEmbedding>& support, std::span<const float> query);

/// Softmax over negated squared distances, computed with
/// max-subtraction; one probability per support entry, in support
/// order. Sums to one.
std::vector<double> class_distribution(const std::vector<SupportEmbedding>& support,
                                       std::span<const float> query);

struct EvalReport {
  std::vector<double> per_run;
  double mean = 0;
  int runs = 0;
  /// Fraction of predictions decided by the tie rule; > 0 flags a
  /// degenerate (e.g. constant) embedding.
  double tie_fraction = 0;
};

/// Runs every episode through the model in eval mode using the chosen
/// feature source ("fc-1" = the embedding, or a conv layer name for
/// its spatial-max features) and nearest-neighbour prediction.
/// Episode images larger than the network input are center-cropped.
EvalReport evaluate(Model<float>& model, const std::vector<Episode>& episodes,
                    const std::string& feature_source = "fc-1");

/// CSV with one "run,accuracy" row per run and a final "mean,<v>" row.
void write_report_csv(const std::string& path, const EvalReport& report);

}  // namespace tripletnet
