#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "support/oracles.hpp"
#include "tripletnet/dataset.hpp"
#include "tripletnet/imageio.hpp"
#include "tripletnet/sampler.hpp"
#include "tripletnet/synth.hpp"

using namespace tripletnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Tensor<float> checker(int h, int w, float a = 1.0f, float b = 0.0f) {
  Tensor<float> img({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.data()[int64_t(y) * w + x] = ((x + y) % 2) ? a : b;
  return img;
}

/// alphabet/character/image tree of white-background glyph scans
void write_omniglot_tree(const fs::path& root, int alphabets, int chars_per, int images_per,
                         int size) {
  for (int a = 0; a < alphabets; ++a) {
    for (int c = 0; c < chars_per; ++c) {
      const fs::path dir =
          root / ("Alphabet" + std::to_string(a)) / ("character" + std::to_string(c));
      fs::create_directories(dir);
      for (int i = 0; i < images_per; ++i) {
        Tensor<float> img({1, size, size});
        for (int64_t k = 0; k < img.numel(); ++k) img.data()[k] = 1.0f;  // white page
        // a dark strip whose row encodes the character
        const int row = 1 + (c * 3 + i) % (size - 2);
        for (int x = 0; x < size; ++x) img.data()[int64_t(row) * size + x] = 0.0f;
        const fs::path file = dir / ("img" + std::to_string(i) + (i % 2 ? ".png" : ".pgm"));
        if (i % 2)
          write_png(file.string(), img);
        else
          write_pgm(file.string(), img);
      }
    }
  }
}

}  // namespace

TEST_CASE("pgm and png round trips preserve 8-bit images") {
  TempDir tmp("tnet_imageio");
  Tensor<float> img = checker(9, 7, 200.0f / 255.0f, 15.0f / 255.0f);

  const std::string pgm = (tmp.path / "img.pgm").string();
  write_pgm(pgm, img);
  Tensor<float> back = read_image(pgm);
  REQUIRE(back.shape() == img.shape());
  for (int64_t i = 0; i < img.numel(); ++i)
    CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-6));

  if (png_supported()) {
    const std::string png = (tmp.path / "img.png").string();
    write_png(png, img);
    Tensor<float> pback = read_image(png);
    for (int64_t i = 0; i < img.numel(); ++i) CHECK(pback.data()[i] == back.data()[i]);

    Tensor<float> rgb({3, 5, 4});
    Rng rng(1);
    for (int64_t i = 0; i < rgb.numel(); ++i)
      rgb.data()[i] = float(int(rng.uniform() * 255) / 255.0);
    const std::string cpng = (tmp.path / "rgb.png").string();
    write_png(cpng, rgb);
    Tensor<float> cback = read_image(cpng);
    REQUIRE(cback.shape() == rgb.shape());
    for (int64_t i = 0; i < rgb.numel(); ++i)
      CHECK(cback.data()[i] == doctest::Approx(rgb.data()[i]).epsilon(1e-6));
  }
}

TEST_CASE("read_image reports missing and malformed files") {
  CHECK_THROWS_AS(read_image("/nonexistent/image.png"), DataError);
  TempDir tmp("tnet_badimg");
  const std::string bad = (tmp.path / "bad.png").string();
  std::ofstream(bad) << "garbage";
  CHECK_THROWS_AS(read_image(bad), DataError);
}

TEST_CASE("omniglot ingestion inverts ink and groups characters into classes") {
  TempDir tmp("tnet_omni");
  write_omniglot_tree(tmp.path, 3, 4, 5, 21);
  IngestReport report;
  ClassIndexedDataset ds = ingest_omniglot_dir(tmp.path.string(), 0, &report);

  CHECK(ds.classes.size() == 12);
  CHECK(ds.total_images() == 60);
  CHECK(ds.channels == 1);
  CHECK(ds.height == 21);
  CHECK(ds.width == 21);
  CHECK(ds.kind == ClassIndexedDataset::Kind::kAffineGray);
  // 5 images per class instead of 20 -> warnings recorded
  CHECK(report.warnings.size() == 12);

  // ink = 1 on background 0 after inversion
  const auto& img = ds.classes[0].images[0];
  float lo = 2, hi = -1;
  for (int64_t i = 0; i < img.numel(); ++i) {
    lo = std::min(lo, img.data()[i]);
    hi = std::max(hi, img.data()[i]);
  }
  CHECK(lo == doctest::Approx(0.0f));
  CHECK(hi == doctest::Approx(1.0f));
  CHECK(ds.classes[0].name == "Alphabet0/character0");
}

TEST_CASE("omniglot ingestion can downsample at load time") {
  TempDir tmp("tnet_omni_small");
  write_omniglot_tree(tmp.path, 1, 2, 3, 32);
  ClassIndexedDataset ds = ingest_omniglot_dir(tmp.path.string(), 16);
  CHECK(ds.height == 16);
  CHECK(ds.width == 16);
}

TEST_CASE("omniglot ingestion fails on a bad root") {
  CHECK_THROWS_AS(ingest_omniglot_dir("/nonexistent/omniglot"), DataError);
}

TEST_CASE("the standard two-subset layout loads both sets") {
  TempDir tmp("tnet_omni_both");
  write_omniglot_tree(tmp.path / "images_background", 2, 3, 2, 15);
  write_omniglot_tree(tmp.path / "images_evaluation", 1, 4, 2, 15);
  auto [background, evaluation] = ingest_omniglot(tmp.path.string());
  CHECK(background.classes.size() == 6);
  CHECK(evaluation.classes.size() == 4);
  CHECK_THROWS_AS(ingest_omniglot((tmp.path / "images_background").string()), DataError);
}

TEST_CASE("natural ingestion resizes to the common geometry") {
  TempDir tmp("tnet_nat");
  std::ofstream manifest((tmp.path / "manifest.csv").string());
  Rng rng(3);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 4; ++i) {
      Tensor<float> img({3, 20 + 3 * c, 24 + 2 * i});
      for (int64_t k = 0; k < img.numel(); ++k) img.data()[k] = float(rng.uniform());
      const std::string rel = "img_" + std::to_string(c) + "_" + std::to_string(i) + ".ppm";
      write_ppm((tmp.path / rel).string(), img);
      manifest << rel << "," << c << ",class" << c << "\n";
    }
  }
  manifest.close();

  ClassIndexedDataset ds =
      ingest_natural(tmp.path.string(), (tmp.path / "manifest.csv").string(), 32);
  CHECK(ds.classes.size() == 3);
  CHECK(ds.total_images() == 12);
  CHECK(ds.kind == ClassIndexedDataset::Kind::kNatural);
  for (const auto& c : ds.classes)
    for (const auto& img : c.images) {
      CHECK(img.dim(0) == 3);
      CHECK(img.dim(1) == 32);
      CHECK(img.dim(2) == 32);
      for (int64_t k = 0; k < img.numel(); ++k) {
        CHECK(img.data()[k] >= 0.0f);
        CHECK(img.data()[k] <= 1.0f);
      }
    }
  CHECK(ds.classes[1].name == "class1");
  CHECK_THROWS_AS(ingest_natural(tmp.path.string(), "/missing/manifest.csv", 32), DataError);
}

TEST_CASE("class splits partition without overlap") {
  ClassIndexedDataset ds = make_glyph_dataset(10, 3, 16, 5);
  auto [a, b] = split_classes_seeded(ds, 4, 77);
  CHECK(a.classes.size() == 4);
  CHECK(b.classes.size() == 6);
  std::set<int> ids_a, ids_b;
  for (const auto& c : a.classes) ids_a.insert(c.id);
  for (const auto& c : b.classes) ids_b.insert(c.id);
  for (int id : ids_a) CHECK(ids_b.count(id) == 0);

  auto [c, d] = split_classes(ds, {0, 2, 9});
  CHECK(c.classes.size() == 3);
  CHECK(d.classes.size() == 7);
  CHECK_THROWS_AS(split_classes(ds, {0, 0}), ValueError);
  CHECK_THROWS_AS(split_classes(ds, {123}), ValueError);
}

TEST_CASE("alphabet splits keep alphabets intact") {
  TempDir tmp("tnet_alpha");
  write_omniglot_tree(tmp.path, 4, 3, 2, 12);
  ClassIndexedDataset ds = ingest_omniglot_dir(tmp.path.string());
  auto [train, val] = split_alphabets_seeded(ds, 3, 11);
  CHECK(train.classes.size() == 9);
  CHECK(val.classes.size() == 3);
  std::set<std::string> train_alpha, val_alpha;
  for (const auto& c : train.classes) train_alpha.insert(c.name.substr(0, c.name.find('/')));
  for (const auto& c : val.classes) val_alpha.insert(c.name.substr(0, c.name.find('/')));
  CHECK(train_alpha.size() == 3);
  CHECK(val_alpha.size() == 1);
  for (const auto& a : train_alpha) CHECK(val_alpha.count(a) == 0);
}

TEST_CASE("one-shot extraction removes the support instance from the pool") {
  ClassIndexedDataset novel = make_glyph_dataset(6, 4, 16, 9);
  auto [oneshot, pool] = extract_oneshot(novel, 123);
  REQUIRE(oneshot.items.size() == 6);
  for (size_t i = 0; i < oneshot.items.size(); ++i) {
    const auto& cls = pool.class_by_id(oneshot.items[i].class_id);
    CHECK(cls.images.size() == 3);
    for (const auto& img : cls.images) {
      bool identical = true;
      for (int64_t k = 0; k < img.numel() && identical; ++k)
        identical = img.data()[k] == oneshot.items[i].image.data()[k];
      CHECK(!identical);
    }
  }
  ClassIndexedDataset thin = make_glyph_dataset(3, 1, 16, 9);
  CHECK_THROWS_AS(extract_oneshot(thin, 1), DataError);
}

TEST_CASE("identity affine parameters reproduce the input") {
  Tensor<float> img = checker(15, 13, 0.8f, 0.1f);
  Tensor<float> out = affine_apply(img, AffineCoeffs::identity());
  for (int64_t i = 0; i < img.numel(); ++i)
    CHECK(std::abs(out.data()[i] - img.data()[i]) < 1e-6f);
}

TEST_CASE("pure translation moves a delta image exactly") {
  Tensor<float> img({1, 11, 11});
  img.data()[5 * 11 + 4] = 1.0f;
  AffineCoeffs t = AffineCoeffs::identity();
  t.tx = 2.0f;
  Tensor<float> out = affine_apply(img, t);
  CHECK(out.data()[5 * 11 + 6] == doctest::Approx(1.0f));
  float total = 0;
  for (int64_t i = 0; i < out.numel(); ++i) total += out.data()[i];
  CHECK(total == doctest::Approx(1.0f));
}

TEST_CASE("affine augmentation keeps shape and range for sampled parameters") {
  Tensor<float> img = checker(19, 19);
  AugmentParams params;
  for (uint64_t seed = 0; seed < 25; ++seed) {
    Tensor<float> out = affine_augment(img, params, seed);
    CHECK(out.shape() == img.shape());
    for (int64_t i = 0; i < out.numel(); ++i) {
      CHECK(out.data()[i] >= -1e-6f);
      CHECK(out.data()[i] <= 1.0f + 1e-6f);
    }
  }
  Tensor<float> a = affine_augment(img, params, 7);
  Tensor<float> b = affine_augment(img, params, 7);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("natural augmentation crops, optionally flips and rescales contrast") {
  Tensor<float> img({3, 40, 40});
  Rng rng(5);
  for (int64_t i = 0; i < img.numel(); ++i) img.data()[i] = float(rng.uniform());
  AugmentParams params;
  params.crop_size = 24;

  for (uint64_t seed = 0; seed < 10; ++seed) {
    Tensor<float> out = natural_augment(img, params, seed);
    CHECK(out.shape() == std::vector<int>{3, 24, 24});
    for (int64_t i = 0; i < out.numel(); ++i) {
      CHECK(out.data()[i] >= 0.0f);
      CHECK(out.data()[i] <= 1.0f);
    }
  }

  // identity settings (factor 1, no flip) give an exact sub-window
  AugmentParams fixed = params;
  fixed.flip_prob = 0.0f;
  fixed.contrast_min = fixed.contrast_max = 1.0f;
  Tensor<float> out = natural_augment(img, fixed, 3);
  bool found = false;
  for (int oy = 0; oy <= 16 && !found; ++oy)
    for (int ox = 0; ox <= 16 && !found; ++ox) {
      bool match = true;
      for (int c = 0; c < 3 && match; ++c)
        for (int y = 0; y < 24 && match; ++y)
          for (int x = 0; x < 24 && match; ++x)
            match = out.data()[(int64_t(c) * 24 + y) * 24 + x] ==
                    img.data()[(int64_t(c) * 40 + oy + y) * 40 + ox + x];
      found = match;
    }
  CHECK(found);

  // flipping twice composes to the plain crop
  Tensor<float> once = horizontal_flip(out);
  Tensor<float> twice = horizontal_flip(once);
  for (int64_t i = 0; i < out.numel(); ++i) CHECK(twice.data()[i] == out.data()[i]);

  CHECK_THROWS_AS(natural_augment(checker(10, 10), params, 0), ValueError);
}

TEST_CASE("triplet batches satisfy the class contracts") {
  ClassIndexedDataset base = make_glyph_dataset(8, 5, 16, 21);
  AugmentParams params;
  TripletBatch batch = sample_triplet_batch(base, params, 64, 99);
  CHECK(batch.items.size() == 64);
  for (const auto& t : batch.items) {
    CHECK(t.pos_class != t.neg_class);
    CHECK(t.source == TripletSource::kBase);
    CHECK(t.pos1.shape() == std::vector<int>{1, 16, 16});
  }
  // determinism
  TripletBatch again = sample_triplet_batch(base, params, 64, 99);
  for (size_t i = 0; i < batch.items.size(); ++i) {
    CHECK(batch.items[i].pos_class == again.items[i].pos_class);
    for (int64_t k = 0; k < batch.items[i].pos1.numel(); ++k)
      CHECK(batch.items[i].pos1.data()[k] == again.items[i].pos1.data()[k]);
  }
}

TEST_CASE("degenerate classes are resampled, not fatal") {
  ClassIndexedDataset base = make_glyph_dataset(3, 4, 16, 31);
  base.classes[1].images.resize(1);  // cannot host a positive pair
  AugmentParams params;
  TripletBatch batch = sample_triplet_batch(base, params, 40, 5);
  for (const auto& t : batch.items) CHECK(t.pos_class != base.classes[1].id);

  ClassIndexedDataset hopeless = make_glyph_dataset(2, 1, 16, 32);
  CHECK_THROWS_AS(sample_triplet_batch(hopeless, params, 4, 1), ValueError);
  ClassIndexedDataset single = make_glyph_dataset(1, 5, 16, 33);
  CHECK_THROWS_AS(sample_triplet_batch(single, params, 4, 1), ValueError);
}

TEST_CASE("positive class frequencies are uniform over many draws") {
  ClassIndexedDataset base = make_glyph_dataset(10, 4, 12, 41);
  AugmentParams params;
  std::map<int, int> counts;
  const int batches = 400, size = 50;  // 20k triplets
  for (int b = 0; b < batches; ++b) {
    TripletBatch batch = sample_triplet_batch(base, params, size, 1000 + uint64_t(b));
    for (const auto& t : batch.items) counts[t.pos_class]++;
  }
  const double total = batches * size;
  double chi2 = 0;
  const double expected = total / 10.0;
  for (const auto& [cls, n] : counts) {
    CHECK(double(n) / total > 0.09);
    CHECK(double(n) / total < 0.11);
    chi2 += (n - expected) * (n - expected) / expected;
  }
  CHECK(oracles::chi2_sf(chi2, 9) > 0.01);
}

TEST_CASE("finetune batches mix one-shot and base triplets evenly") {
  ClassIndexedDataset base = make_glyph_dataset(6, 5, 16, 51);
  ClassIndexedDataset novel = make_glyph_dataset(5, 3, 16, 52, 100);
  auto [oneshot, pool] = extract_oneshot(novel, 7);
  AugmentParams params;

  int oneshot_count = 0, total = 0;
  for (int b = 0; b < 100; ++b) {
    TripletBatch batch = sample_finetune_batch(base, oneshot, params, 100, 3000 + uint64_t(b));
    for (const auto& t : batch.items) {
      ++total;
      if (t.source == TripletSource::kOneShot) {
        ++oneshot_count;
        CHECK(t.pos_class != t.neg_class);
        CHECK(t.pos_class >= 100);
        CHECK(t.neg_class >= 100);
        // pos1 is the untouched one-shot instance
        bool pos1_matches = false;
        for (const auto& item : oneshot.items) {
          if (item.class_id != t.pos_class) continue;
          pos1_matches = true;
          for (int64_t k = 0; k < item.image.numel(); ++k)
            pos1_matches = pos1_matches && item.image.data()[k] == t.pos1.data()[k];
        }
        CHECK(pos1_matches);
      }
    }
  }
  // binomial 3-sigma band around one half for 10^4 draws
  const double frac = double(oneshot_count) / double(total);
  const double sigma = std::sqrt(0.25 / double(total));
  CHECK(frac > 0.5 - 3 * sigma);
  CHECK(frac < 0.5 + 3 * sigma);

  OneShotSet tiny;
  tiny.items.push_back(oneshot.items[0]);
  CHECK_THROWS_AS(sample_finetune_batch(base, tiny, params, 8, 1), ValueError);
  ClassIndexedDataset empty_base;
  empty_base.kind = ClassIndexedDataset::Kind::kAffineGray;
  CHECK_THROWS_AS(sample_finetune_batch(empty_base, oneshot, params, 8, 1), ValueError);
}

TEST_CASE("pair batches balance labels exactly") {
  ClassIndexedDataset ds = make_glyph_dataset(7, 4, 16, 61);
  AugmentParams params;
  for (int size : {8, 9}) {
    PairBatch batch = sample_pair_batch(ds, params, size, 17);
    int same = 0;
    for (const auto& p : batch.items) {
      if (p.same) {
        ++same;
        CHECK(p.class_a == p.class_b);
      } else {
        CHECK(p.class_a != p.class_b);
      }
    }
    CHECK(same == (size + 1) / 2);
  }
}

TEST_CASE("dataset caches round trip exactly") {
  TempDir tmp("tnet_cache");
  ClassIndexedDataset ds = make_glyph_dataset(4, 3, 12, 71);
  const std::string path = (tmp.path / "ds.tnds").string();
  save_cache(path, ds);
  ClassIndexedDataset back = load_cache(path);
  CHECK(back.classes.size() == ds.classes.size());
  CHECK(back.kind == ds.kind);
  CHECK(back.height == ds.height);
  for (size_t c = 0; c < ds.classes.size(); ++c) {
    CHECK(back.classes[c].id == ds.classes[c].id);
    CHECK(back.classes[c].name == ds.classes[c].name);
    REQUIRE(back.classes[c].images.size() == ds.classes[c].images.size());
    for (size_t i = 0; i < ds.classes[c].images.size(); ++i)
      for (int64_t k = 0; k < ds.classes[c].images[i].numel(); ++k)
        CHECK(back.classes[c].images[i].data()[k] == ds.classes[c].images[i].data()[k]);
  }

  // byte-identical rewrite
  const std::string path2 = (tmp.path / "ds2.tnds").string();
  save_cache(path2, back);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  CHECK_THROWS_AS(load_cache("/missing/ds.tnds"), DataError);
}

TEST_CASE("glyph datasets are deterministic and class-distinct") {
  ClassIndexedDataset a = make_glyph_dataset(5, 4, 20, 81);
  ClassIndexedDataset b = make_glyph_dataset(5, 4, 20, 81);
  for (size_t c = 0; c < a.classes.size(); ++c)
    for (size_t i = 0; i < a.classes[c].images.size(); ++i)
      for (int64_t k = 0; k < a.classes[c].images[i].numel(); ++k)
        CHECK(a.classes[c].images[i].data()[k] == b.classes[c].images[i].data()[k]);

  // intra-class distances are smaller than inter-class on average
  auto dist = [](const Tensor<float>& x, const Tensor<float>& y) {
    double s = 0;
    for (int64_t k = 0; k < x.numel(); ++k) {
      const double d = double(x.data()[k]) - double(y.data()[k]);
      s += d * d;
    }
    return s;
  };
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (size_t c = 0; c < a.classes.size(); ++c)
    for (size_t i = 0; i < a.classes[c].images.size(); ++i)
      for (size_t j = 0; j < a.classes[c].images.size(); ++j) {
        if (i == j) continue;
        intra += dist(a.classes[c].images[i], a.classes[c].images[j]);
        ++n_intra;
      }
  for (size_t c = 0; c < a.classes.size(); ++c)
    for (size_t c2 = c + 1; c2 < a.classes.size(); ++c2) {
      inter += dist(a.classes[c].images[0], a.classes[c2].images[0]);
      ++n_inter;
    }
  CHECK(intra / n_intra < inter / n_inter);
}
