#include "tripletnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "tripletnet/augment.hpp"
#include "tripletnet/sampler.hpp"

namespace tripletnet {

namespace {

double sq_dist(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = double(a[i]) - double(b[i]);
    s += d * d;
  }
  return s;
}

Tensor<float> fit_to_input(const ArchConfig& arch, const Tensor<float>& img) {
  if (img.dim(0) != arch.in_channels)
    throw ShapeError("evaluate: image channels do not match the network");
  if (img.dim(1) == arch.in_height && img.dim(2) == arch.in_width) return img;
  if (img.dim(1) >= arch.in_height && img.dim(2) >= arch.in_width &&
      arch.in_height == arch.in_width)
    return center_crop(img, arch.in_height);
  throw ShapeError("evaluate: image smaller than the network input");
}

}  // namespace

int predict_nn(const std::vector<SupportEmbedding>& support, std::span<const float> query) {
  if (support.empty()) throw ValueError("predict_nn: empty support set");
  int best_class = support[0].class_id;
  double best_d = sq_dist(support[0].vec, query);
  for (size_t i = 1; i < support.size(); ++i) {
    if (support[i].vec.size() != query.size())
      throw ShapeError("predict_nn: embedding lengths do not match");
    const double d = sq_dist(support[i].vec, query);
    if (d < best_d || (d == best_d && support[i].class_id < best_class)) {
      best_d = d;
      best_class = support[i].class_id;
    }
  }
  return best_class;
}

std::vector<double> class_distribution(const std::vector<SupportEmbedding>& support,
                                       std::span<const float> query) {
  if (support.empty()) throw ValueError("class_distribution: empty support set");
  std::vector<double> neg_d(support.size());
  for (size_t i = 0; i < support.size(); ++i) neg_d[i] = -sq_dist(support[i].vec, query);
  const double m = *std::max_element(neg_d.begin(), neg_d.end());
  double z = 0;
  for (double& v : neg_d) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : neg_d) v /= z;
  return neg_d;
}

EvalReport evaluate(Model<float>& model, const std::vector<Episode>& episodes,
                    const std::string& feature_source) {
  if (episodes.empty()) throw ValueError("evaluate: no episodes");
  EvalReport report;
  int64_t ties = 0, total_queries = 0;

  for (const auto& ep : episodes) {
    std::vector<Tensor<float>> fitted;
    fitted.reserve(ep.support.size() + ep.queries.size());
    for (const auto& img : ep.support) fitted.push_back(fit_to_input(model.arch, img));
    for (const auto& q : ep.queries) fitted.push_back(fit_to_input(model.arch, q.image));

    Tensor<float> feats = layer_features_batch(model, stack_images(fitted), feature_source);
    const int dim = feats.dim(1);

    std::vector<SupportEmbedding> support(ep.support.size());
    for (size_t i = 0; i < ep.support.size(); ++i) {
      support[i].class_id = ep.class_ids[i];
      support[i].vec.assign(feats.data() + int64_t(i) * dim, feats.data() + int64_t(i + 1) * dim);
    }

    int64_t correct = 0;
    for (size_t q = 0; q < ep.queries.size(); ++q) {
      const float* qv = feats.data() + int64_t(ep.support.size() + q) * dim;
      std::span<const float> query(qv, size_t(dim));
      const int predicted = predict_nn(support, query);
      if (predicted == ep.queries[q].true_class) ++correct;

      double best = std::numeric_limits<double>::infinity();
      int at_best = 0;
      for (const auto& s : support) {
        const double d = sq_dist(s.vec, query);
        if (d < best) {
          best = d;
          at_best = 1;
        } else if (d == best) {
          ++at_best;
        }
      }
      if (at_best > 1) ++ties;
    }
    total_queries += int64_t(ep.queries.size());
    report.per_run.push_back(double(correct) / double(ep.queries.size()));
  }

  report.runs = int(report.per_run.size());
  double s = 0;
  for (double a : report.per_run) s += a;
  report.mean = s / double(report.runs);
  report.tie_fraction = total_queries > 0 ? double(ties) / double(total_queries) : 0.0;
  return report;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot open report: " + path);
  os << "run,accuracy\n";
  char buf[40];
  for (size_t i = 0; i < report.per_run.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.10g", report.per_run[i]);
    os << i << "," << buf << "\n";
  }
  std::snprintf(buf, sizeof(buf), "%.10g", report.mean);
  os << "mean," << buf << "\n";
  if (!os) throw DataError("write failed: " + path);
}

}  // namespace tripletnet
