#include "tripletnet/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "tripletnet/imageio.hpp"

namespace fs = std::filesystem;

namespace tripletnet {

int64_t ClassIndexedDataset::total_images() const {
  int64_t n = 0;
  for (const auto& c : classes) n += int64_t(c.images.size());
  return n;
}

const ClassIndexedDataset::ClassEntry& ClassIndexedDataset::class_by_id(int id) const {
  for (const auto& c : classes)
    if (c.id == id) return c;
  throw ValueError("unknown class id: " + std::to_string(id));
}

void ClassIndexedDataset::validate() const {
  for (const auto& c : classes) {
    if (c.images.empty()) throw DataError("class has no images: " + c.name);
    for (const auto& img : c.images)
      if (img.ndim() != 3 || img.dim(0) != channels || img.dim(1) != height ||
          img.dim(2) != width)
        throw DataError("inconsistent image shape in class: " + c.name);
  }
}

namespace {

bool is_image_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

std::vector<std::string> sorted_subdirs(const fs::path& root) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

Tensor<float> invert_ink(const Tensor<float>& img) {
  Tensor<float> out(img.shape());
  for (int64_t i = 0; i < img.numel(); ++i) out.data()[i] = 1.0f - img.data()[i];
  return out;
}

Tensor<float> to_gray(const Tensor<float>& img, const std::string& path) {
  if (img.dim(0) == 1) return img;
  if (img.dim(0) != 3) throw DataError("expected grayscale or rgb image: " + path);
  const int h = img.dim(1), w = img.dim(2);
  Tensor<float> out({1, h, w});
  const int64_t plane = int64_t(h) * w;
  for (int64_t i = 0; i < plane; ++i)
    out.data()[i] =
        0.299f * img.data()[i] + 0.587f * img.data()[plane + i] + 0.114f * img.data()[2 * plane + i];
  return out;
}

}  // namespace

ClassIndexedDataset ingest_omniglot_dir(const std::string& root, int downsample,
                                        IngestReport* report) {
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root);
  ClassIndexedDataset ds;
  ds.kind = ClassIndexedDataset::Kind::kAffineGray;
  ds.channels = 1;

  int next_id = 0;
  for (const auto& alphabet : sorted_subdirs(root)) {
    const fs::path adir = fs::path(root) / alphabet;
    for (const auto& character : sorted_subdirs(adir)) {
      ClassIndexedDataset::ClassEntry entry;
      entry.id = next_id++;
      entry.name = alphabet + "/" + character;
      for (const auto& file : sorted_images(adir / character)) {
        Tensor<float> img = invert_ink(to_gray(read_image(file.string()), file.string()));
        if (downsample > 0) img = bilinear_resize(img, downsample, downsample);
        if (ds.height == 0) {
          ds.height = img.dim(1);
          ds.width = img.dim(2);
        }
        entry.images.push_back(std::move(img));
      }
      if (entry.images.empty()) throw DataError("character folder has no images: " + entry.name);
      if (report && entry.images.size() != 20)
        report->warnings.push_back("class " + entry.name + " has " +
                                   std::to_string(entry.images.size()) + " images, expected 20");
      ds.classes.push_back(std::move(entry));
    }
  }
  if (ds.classes.empty()) throw DataError("no character classes found under: " + root);
  ds.validate();
  return ds;
}

std::pair<ClassIndexedDataset, ClassIndexedDataset> ingest_omniglot(const std::string& root,
                                                                    int downsample,
                                                                    IngestReport* report) {
  const fs::path bg = fs::path(root) / "images_background";
  const fs::path ev = fs::path(root) / "images_evaluation";
  if (!fs::is_directory(bg) || !fs::is_directory(ev))
    throw DataError("expected images_background/ and images_evaluation/ under: " + root);
  return {ingest_omniglot_dir(bg.string(), downsample, report),
          ingest_omniglot_dir(ev.string(), downsample, report)};
}

ClassIndexedDataset ingest_natural(const std::string& root, const std::string& manifest_path,
                                   int size, IngestReport* report) {
  std::ifstream mf(manifest_path);
  if (!mf) throw DataError("cannot open manifest: " + manifest_path);

  std::map<int, ClassIndexedDataset::ClassEntry> by_id;
  std::string line;
  int lineno = 0;
  while (std::getline(mf, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto c1 = line.find(',');
    if (c1 == std::string::npos)
      throw DataError("manifest line " + std::to_string(lineno) + ": expected path,class_id");
    const std::string rel = line.substr(0, c1);
    std::string rest = line.substr(c1 + 1);
    std::string name;
    const auto c2 = rest.find(',');
    if (c2 != std::string::npos) {
      name = rest.substr(c2 + 1);
      rest = rest.substr(0, c2);
    }
    int id = 0;
    try {
      id = std::stoi(rest);
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) + ": bad class id");
    }

    const fs::path path = fs::path(root) / rel;
    Tensor<float> img = read_image(path.string());
    if (img.dim(0) == 1) {
      // replicate grayscale sources across the three channels
      Tensor<float> rgb({3, img.dim(1), img.dim(2)});
      const int64_t plane = int64_t(img.dim(1)) * img.dim(2);
      for (int c = 0; c < 3; ++c)
        std::copy(img.data(), img.data() + plane, rgb.data() + c * plane);
      img = rgb;
    }
    img = bilinear_resize(img, size, size);

    auto& entry = by_id[id];
    entry.id = id;
    if (entry.name.empty()) entry.name = name.empty() ? ("class-" + std::to_string(id)) : name;
    entry.images.push_back(std::move(img));
  }
  if (by_id.empty()) throw DataError("manifest lists no images: " + manifest_path);

  ClassIndexedDataset ds;
  ds.kind = ClassIndexedDataset::Kind::kNatural;
  ds.channels = 3;
  ds.height = size;
  ds.width = size;
  for (auto& [id, entry] : by_id) {
    if (report && entry.images.size() < 2)
      report->warnings.push_back("class " + entry.name + " has a single image");
    ds.classes.push_back(std::move(entry));
  }
  ds.validate();
  return ds;
}

namespace {

std::pair<ClassIndexedDataset, ClassIndexedDataset> partition(const ClassIndexedDataset& ds,
                                                              const std::vector<bool>& take) {
  ClassIndexedDataset first = ds, second = ds;
  first.classes.clear();
  second.classes.clear();
  for (size_t i = 0; i < ds.classes.size(); ++i)
    (take[i] ? first : second).classes.push_back(ds.classes[i]);
  return {std::move(first), std::move(second)};
}

}  // namespace

std::pair<ClassIndexedDataset, ClassIndexedDataset> split_classes(
    const ClassIndexedDataset& ds, const std::vector<int>& first_ids) {
  std::vector<bool> take(ds.classes.size(), false);
  for (int id : first_ids) {
    bool found = false;
    for (size_t i = 0; i < ds.classes.size(); ++i) {
      if (ds.classes[i].id == id) {
        if (take[i]) throw ValueError("split: duplicate class id " + std::to_string(id));
        take[i] = true;
        found = true;
        break;
      }
    }
    if (!found) throw ValueError("split: unknown class id " + std::to_string(id));
  }
  return partition(ds, take);
}

std::pair<ClassIndexedDataset, ClassIndexedDataset> split_classes_seeded(
    const ClassIndexedDataset& ds, int n_first, uint64_t seed) {
  if (n_first < 0 || size_t(n_first) > ds.classes.size())
    throw ValueError("split: class count out of range");
  std::vector<size_t> order(ds.classes.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(uint64_t(i))]);
  std::vector<bool> take(ds.classes.size(), false);
  for (int i = 0; i < n_first; ++i) take[order[size_t(i)]] = true;
  return partition(ds, take);
}

std::pair<ClassIndexedDataset, ClassIndexedDataset> split_alphabets_seeded(
    const ClassIndexedDataset& ds, int n_first_alphabets, uint64_t seed) {
  std::vector<std::string> alphabets;
  for (const auto& c : ds.classes) {
    const auto slash = c.name.find('/');
    const std::string a = slash == std::string::npos ? c.name : c.name.substr(0, slash);
    if (std::find(alphabets.begin(), alphabets.end(), a) == alphabets.end())
      alphabets.push_back(a);
  }
  if (n_first_alphabets < 0 || size_t(n_first_alphabets) > alphabets.size())
    throw ValueError("split: alphabet count out of range");
  std::sort(alphabets.begin(), alphabets.end());
  Rng rng(seed);
  for (size_t i = alphabets.size(); i > 1; --i)
    std::swap(alphabets[i - 1], alphabets[rng.uniform_int(uint64_t(i))]);
  std::vector<bool> in_first_set(ds.classes.size(), false);
  for (size_t i = 0; i < ds.classes.size(); ++i) {
    const auto& name = ds.classes[i].name;
    const auto slash = name.find('/');
    const std::string a = slash == std::string::npos ? name : name.substr(0, slash);
    for (int j = 0; j < n_first_alphabets; ++j)
      if (alphabets[size_t(j)] == a) in_first_set[i] = true;
  }
  return partition(ds, in_first_set);
}

std::pair<OneShotSet, ClassIndexedDataset> extract_oneshot(const ClassIndexedDataset& novel,
                                                           uint64_t seed) {
  OneShotSet os;
  ClassIndexedDataset pool = novel;
  for (size_t i = 0; i < novel.classes.size(); ++i) {
    const auto& entry = novel.classes[i];
    if (entry.images.size() < 2)
      throw DataError("class needs at least two instances for one-shot extraction: " + entry.name);
    Rng rng(mix_seed(seed, uint64_t(entry.id)));
    const size_t pick = size_t(rng.uniform_int(uint64_t(entry.images.size())));
    os.items.push_back({entry.id, entry.images[pick]});
    auto& dst = pool.classes[i].images;
    dst.erase(dst.begin() + std::ptrdiff_t(pick));
  }
  return {std::move(os), std::move(pool)};
}

namespace {

constexpr uint32_t kCacheMagic = 0x53444e54;  // "TNDS"
constexpr uint32_t kCacheVersion = 1;

void wr_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t rd_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw DataError("dataset cache: truncated file");
  return v;
}

}  // namespace

void save_cache(const std::string& path, const ClassIndexedDataset& ds) {
  ds.validate();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + tmp);
    wr_u32(os, kCacheMagic);
    wr_u32(os, kCacheVersion);
    wr_u32(os, ds.kind == ClassIndexedDataset::Kind::kAffineGray ? 0 : 1);
    wr_u32(os, uint32_t(ds.channels));
    wr_u32(os, uint32_t(ds.height));
    wr_u32(os, uint32_t(ds.width));
    wr_u32(os, uint32_t(ds.classes.size()));
    for (const auto& c : ds.classes) {
      wr_u32(os, uint32_t(c.id));
      const uint16_t n = uint16_t(c.name.size());
      os.write(reinterpret_cast<const char*>(&n), 2);
      os.write(c.name.data(), n);
      wr_u32(os, uint32_t(c.images.size()));
      for (const auto& img : c.images)
        os.write(reinterpret_cast<const char*>(img.data()),
                 std::streamsize(img.numel() * sizeof(float)));
    }
    os.flush();
    if (!os) throw DataError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot finalize cache: " + path + ": " + ec.message());
  }
}

ClassIndexedDataset load_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open dataset cache: " + path);
  if (rd_u32(is) != kCacheMagic) throw DataError("not a dataset cache: " + path);
  if (rd_u32(is) != kCacheVersion) throw DataError("unsupported cache version: " + path);
  ClassIndexedDataset ds;
  ds.kind = rd_u32(is) == 0 ? ClassIndexedDataset::Kind::kAffineGray
                            : ClassIndexedDataset::Kind::kNatural;
  ds.channels = int(rd_u32(is));
  ds.height = int(rd_u32(is));
  ds.width = int(rd_u32(is));
  const uint32_t n_classes = rd_u32(is);
  for (uint32_t i = 0; i < n_classes; ++i) {
    ClassIndexedDataset::ClassEntry entry;
    entry.id = int(rd_u32(is));
    uint16_t len = 0;
    is.read(reinterpret_cast<char*>(&len), 2);
    entry.name.resize(len);
    is.read(entry.name.data(), len);
    const uint32_t n_imgs = rd_u32(is);
    for (uint32_t k = 0; k < n_imgs; ++k) {
      Tensor<float> img({ds.channels, ds.height, ds.width});
      is.read(reinterpret_cast<char*>(img.data()), std::streamsize(img.numel() * sizeof(float)));
      if (!is) throw DataError("dataset cache: truncated payload: " + path);
      entry.images.push_back(std::move(img));
    }
    ds.classes.push_back(std::move(entry));
  }
  ds.validate();
  return ds;
}

Tensor<float> eval_view(const ClassIndexedDataset& ds, const Tensor<float>& image, int crop) {
  if (ds.kind == ClassIndexedDataset::Kind::kNatural && crop > 0 &&
      (image.dim(1) > crop || image.dim(2) > crop))
    return center_crop(image, crop);
  return image;
}

}  // namespace tripletnet
