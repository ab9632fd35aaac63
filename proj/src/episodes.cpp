#include "tripletnet/episodes.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "tripletnet/imageio.hpp"

namespace fs = std::filesystem;

namespace tripletnet {

namespace {

template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.uniform_int(uint64_t(i))]);
}

}  // namespace

std::vector<Episode> build_episodes(const ClassIndexedDataset& novel, int way,
                                    int queries_per_class, int runs, uint64_t seed) {
  if (way < 2) throw ValueError("build_episodes: way must be at least 2");
  if (queries_per_class < 1) throw ValueError("build_episodes: queries_per_class must be positive");
  if (runs < 1) throw ValueError("build_episodes: runs must be positive");
  if (int(novel.classes.size()) < way)
    throw ValueError("build_episodes: dataset has fewer classes than `way`");

  std::vector<Episode> episodes;
  for (int run = 0; run < runs; ++run) {
    Rng rng(mix_seed(seed, uint64_t(run)));
    std::vector<size_t> order(novel.classes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    seeded_shuffle(order, rng);

    Episode ep;
    ep.run_id = run;
    ep.way = way;
    for (int c = 0; c < way; ++c) {
      const auto& cls = novel.classes[order[size_t(c)]];
      if (int(cls.images.size()) < 1 + queries_per_class)
        throw DataError("class " + cls.name + " has too few instances for " +
                        std::to_string(queries_per_class) + " queries plus one support");
      std::vector<size_t> idx(cls.images.size());
      for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      seeded_shuffle(idx, rng);
      ep.class_ids.push_back(cls.id);
      ep.support.push_back(cls.images[idx[0]]);
      for (int q = 0; q < queries_per_class; ++q)
        ep.queries.push_back({cls.images[idx[size_t(q) + 1]], cls.id});
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

std::vector<Episode> build_episodes_from_oneshot(const OneShotSet& oneshot,
                                                 const ClassIndexedDataset& pool, int way,
                                                 int queries_per_class, int runs, uint64_t seed) {
  if (way < 2) throw ValueError("build_episodes: way must be at least 2");
  if (int(oneshot.items.size()) < way)
    throw ValueError("build_episodes: one-shot set has fewer classes than `way`");

  std::vector<Episode> episodes;
  for (int run = 0; run < runs; ++run) {
    Rng rng(mix_seed(seed, uint64_t(run)));
    std::vector<size_t> order(oneshot.items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    seeded_shuffle(order, rng);

    Episode ep;
    ep.run_id = run;
    ep.way = way;
    for (int c = 0; c < way; ++c) {
      const auto& item = oneshot.items[order[size_t(c)]];
      const auto& cls = pool.class_by_id(item.class_id);
      if (int(cls.images.size()) < queries_per_class)
        throw DataError("class " + cls.name + " has too few pool instances for " +
                        std::to_string(queries_per_class) + " queries");
      std::vector<size_t> idx(cls.images.size());
      for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      seeded_shuffle(idx, rng);
      ep.class_ids.push_back(item.class_id);
      ep.support.push_back(item.image);
      for (int q = 0; q < queries_per_class; ++q)
        ep.queries.push_back({cls.images[idx[size_t(q)]], item.class_id});
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

std::vector<Episode> load_fixed_episodes(const std::string& root, int downsample) {
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root);
  std::vector<std::string> run_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && e.path().filename().string().rfind("run", 0) == 0)
      run_dirs.push_back(e.path().string());
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty()) throw DataError("no run directories under: " + root);

  auto load_gray = [&](const fs::path& p) {
    Tensor<float> img = read_image(p.string());
    if (img.dim(0) != 1) throw DataError("expected grayscale image: " + p.string());
    for (int64_t i = 0; i < img.numel(); ++i) img.data()[i] = 1.0f - img.data()[i];
    if (downsample > 0) img = bilinear_resize(img, downsample, downsample);
    return img;
  };

  std::vector<Episode> episodes;
  int run_id = 0;
  for (const auto& dir : run_dirs) {
    const fs::path labels = fs::path(dir) / "class_labels.txt";
    std::ifstream is(labels);
    if (!is) throw DataError("cannot open " + labels.string());

    Episode ep;
    ep.run_id = run_id++;
    std::map<std::string, int> class_of_training;  // training path -> class id
    std::string test_rel, train_rel;
    while (is >> test_rel >> train_rel) {
      auto found = class_of_training.find(train_rel);
      int cid = 0;
      if (found == class_of_training.end()) {
        cid = int(class_of_training.size());
        class_of_training.emplace(train_rel, cid);
        ep.class_ids.push_back(cid);
        ep.support.push_back(load_gray(fs::path(dir) / train_rel));
      } else {
        cid = found->second;
      }
      ep.queries.push_back({load_gray(fs::path(dir) / test_rel), cid});
    }
    if (ep.support.empty()) throw DataError("empty class_labels.txt in " + dir);
    ep.way = int(ep.support.size());
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

}  // namespace tripletnet
