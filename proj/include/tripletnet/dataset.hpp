#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tripletnet/augment.hpp"
#include "tripletnet/tensor.hpp"

namespace tripletnet {

/// Images grouped by class. `kind` selects the augmentation family and
/// the evaluation view (natural images are stored at their ingest size
/// and center-cropped to the network input at evaluation time).
struct ClassIndexedDataset {
  enum class Kind { kAffineGray, kNatural };

  struct ClassEntry {
    int id = 0;
    std::string name;
    std::vector<Tensor<float>> images;
  };

  Kind kind = Kind::kAffineGray;
  int channels = 1, height = 0, width = 0;
  std::vector<ClassEntry> classes;  // ascending id order

  int64_t total_images() const;
  const ClassEntry& class_by_id(int id) const;
  void validate() const;
};

/// Exactly one instance per novel class.
struct OneShotSet {
  struct Item {
    int class_id = 0;
    Tensor<float> image;
  };
  std::vector<Item> items;  // ascending class id order
};

struct IngestReport {
  std::vector<std::string> warnings;
};

/// Reads one Omniglot-style tree (alphabet/character/image files) of
/// PNG or PNM scans. Characters become classes named
/// "alphabet/character"; pixels are inverted so ink is 1 on a 0
/// background. `downsample` optionally bilinear-resizes to NxN.
ClassIndexedDataset ingest_omniglot_dir(const std::string& root, int downsample = 0,
                                        IngestReport* report = nullptr);

/// Reads both standard subsets below `root` (images_background/ and
/// images_evaluation/).
std::pair<ClassIndexedDataset, ClassIndexedDataset> ingest_omniglot(const std::string& root,
                                                                    int downsample = 0,
                                                                    IngestReport* report = nullptr);

/// Reads a manifest of "relative/path,class_id[,class_name]" lines and
/// bilinear-resizes every decoded image to 3 x size x size.
ClassIndexedDataset ingest_natural(const std::string& root, const std::string& manifest_path,
                                   int size = 132, IngestReport* report = nullptr);

/// Deterministic class-level partition by explicit ids; errors if ids
/// are unknown or duplicated.
std::pair<ClassIndexedDataset, ClassIndexedDataset> split_classes(
    const ClassIndexedDataset& ds, const std::vector<int>& first_ids);

/// Seeded class-level partition into n_first + rest.
std::pair<ClassIndexedDataset, ClassIndexedDataset> split_classes_seeded(
    const ClassIndexedDataset& ds, int n_first, uint64_t seed);

/// Seeded alphabet-level partition for "alphabet/character" names.
std::pair<ClassIndexedDataset, ClassIndexedDataset> split_alphabets_seeded(
    const ClassIndexedDataset& ds, int n_first_alphabets, uint64_t seed);

/// Samples one instance per class into a OneShotSet; the remainder
/// forms the test pool. The two are disjoint by construction.
std::pair<OneShotSet, ClassIndexedDataset> extract_oneshot(const ClassIndexedDataset& novel,
                                                           uint64_t seed);

/// Binary dataset cache (magic "TNDS"); round trips are exact.
void save_cache(const std::string& path, const ClassIndexedDataset& ds);
ClassIndexedDataset load_cache(const std::string& path);

/// The network-input view of a stored image: identity for grayscale
/// sets, center crop to `crop` for natural sets.
Tensor<float> eval_view(const ClassIndexedDataset& ds, const Tensor<float>& image, int crop);

}  // namespace tripletnet
