// tripletnet command line: ingest datasets, train and fine-tune
// embedding models, evaluate one-shot episodes, export projections.
//
// Exit codes: 0 success, 2 usage/config/data problems, 3 numeric
// failure during training.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "tripletnet/checkpoint.hpp"
#include "tripletnet/dataset.hpp"
#include "tripletnet/eval.hpp"
#include "tripletnet/imageio.hpp"
#include "tripletnet/pca.hpp"
#include "tripletnet/synth.hpp"
#include "tripletnet/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tripletnet;

namespace {

// ---- config parsing -------------------------------------------------

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return j;
}

ArchConfig parse_arch(const json& j) {
  reject_unknown_keys(j, {"preset", "channels", "input", "blocks", "embedding_dim"}, "arch");
  ArchConfig arch;
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    const int channels = j.value("channels", 1);
    if (preset == "paper")
      arch = ArchConfig::paper(channels);
    else if (preset == "small")
      arch = ArchConfig::small_preset();
    else
      throw ConfigError("arch: unknown preset '" + preset + "'");
    return arch;
  }
  if (!j.contains("input") || !j.contains("blocks") || !j.contains("embedding_dim"))
    throw ConfigError("arch: need either a preset or input/blocks/embedding_dim");
  const auto input = j.at("input").get<std::vector<int>>();
  if (input.size() != 3) throw ConfigError("arch: input must be [channels, height, width]");
  arch.in_channels = input[0];
  arch.in_height = input[1];
  arch.in_width = input[2];
  arch.blocks.clear();
  for (const auto& b : j.at("blocks")) {
    const auto pair = b.get<std::vector<int>>();
    if (pair.size() != 2) throw ConfigError("arch: each block is [conv_layers, filters]");
    arch.blocks.emplace_back(pair[0], pair[1]);
  }
  arch.embedding_dim = j.at("embedding_dim").get<int>();
  arch.validate();
  return arch;
}

json arch_to_json(const ArchConfig& arch) {
  json j;
  j["input"] = {arch.in_channels, arch.in_height, arch.in_width};
  json blocks = json::array();
  for (const auto& [convs, filters] : arch.blocks) blocks.push_back({convs, filters});
  j["blocks"] = blocks;
  j["embedding_dim"] = arch.embedding_dim;
  return j;
}

TrainConfig parse_train(const json& j) {
  reject_unknown_keys(j,
                      {"initial_lr", "lr_halving_period", "batch_size", "max_iterations", "lambda",
                       "margin", "seed", "checkpoint_every", "eval_every", "schedule_offset",
                       "objective"},
                      "train");
  TrainConfig cfg;
  cfg.initial_lr = j.value("initial_lr", cfg.initial_lr);
  cfg.lr_halving_period = j.value("lr_halving_period", cfg.lr_halving_period);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.margin = j.value("margin", cfg.margin);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.eval_every = j.value("eval_every", cfg.eval_every);
  cfg.schedule_offset = j.value("schedule_offset", cfg.schedule_offset);
  cfg.validate();
  return cfg;
}

json train_to_json(const TrainConfig& cfg, const std::string& objective) {
  json j;
  j["initial_lr"] = cfg.initial_lr;
  j["lr_halving_period"] = cfg.lr_halving_period;
  j["batch_size"] = cfg.batch_size;
  j["max_iterations"] = cfg.max_iterations;
  j["lambda"] = cfg.lambda;
  j["margin"] = cfg.margin;
  j["seed"] = cfg.seed;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["eval_every"] = cfg.eval_every;
  j["schedule_offset"] = cfg.schedule_offset;
  j["objective"] = objective;
  return j;
}

AugmentParams parse_augment(const json& j) {
  reject_unknown_keys(j,
                      {"shear_x", "shear_y", "rotation_deg", "scale", "translation_frac",
                       "crop_size", "flip_prob", "contrast"},
                      "augment");
  AugmentParams params;
  params.shear_x = j.value("shear_x", params.shear_x);
  params.shear_y = j.value("shear_y", params.shear_y);
  params.rotation_deg = j.value("rotation_deg", params.rotation_deg);
  if (j.contains("scale")) {
    const auto range = j.at("scale").get<std::vector<float>>();
    if (range.size() != 2) throw ConfigError("augment: scale must be [min, max]");
    params.scale_min = range[0];
    params.scale_max = range[1];
  }
  params.translation_frac = j.value("translation_frac", params.translation_frac);
  params.crop_size = j.value("crop_size", params.crop_size);
  params.flip_prob = j.value("flip_prob", params.flip_prob);
  if (j.contains("contrast")) {
    const auto range = j.at("contrast").get<std::vector<float>>();
    if (range.size() != 2) throw ConfigError("augment: contrast must be [min, max]");
    params.contrast_min = range[0];
    params.contrast_max = range[1];
  }
  params.validate();
  return params;
}

json augment_to_json(const AugmentParams& p) {
  json j;
  j["shear_x"] = p.shear_x;
  j["shear_y"] = p.shear_y;
  j["rotation_deg"] = p.rotation_deg;
  j["scale"] = {p.scale_min, p.scale_max};
  j["translation_frac"] = p.translation_frac;
  j["crop_size"] = p.crop_size;
  j["flip_prob"] = p.flip_prob;
  j["contrast"] = {p.contrast_min, p.contrast_max};
  return j;
}

struct EpisodeSpec {
  int way = 5;
  int queries_per_class = 1;
  int runs = 20;
  uint64_t seed = 0;
  std::optional<uint64_t> oneshot_seed;
};

EpisodeSpec parse_episodes(const json& j) {
  reject_unknown_keys(j, {"way", "queries_per_class", "runs", "seed", "oneshot_seed"}, "episodes");
  EpisodeSpec spec;
  spec.way = j.value("way", spec.way);
  spec.queries_per_class = j.value("queries_per_class", spec.queries_per_class);
  spec.runs = j.value("runs", spec.runs);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("oneshot_seed")) spec.oneshot_seed = j.at("oneshot_seed").get<uint64_t>();
  return spec;
}

json episodes_to_json(const EpisodeSpec& s) {
  json j;
  j["way"] = s.way;
  j["queries_per_class"] = s.queries_per_class;
  j["runs"] = s.runs;
  j["seed"] = s.seed;
  if (s.oneshot_seed) j["oneshot_seed"] = *s.oneshot_seed;
  return j;
}

void write_resolved_config(const std::string& out_dir, const json& resolved) {
  fs::create_directories(out_dir);
  std::ofstream os(out_dir + "/resolved_config.json", std::ios::trunc);
  if (!os) throw DataError("cannot write resolved config under " + out_dir);
  os << resolved.dump(2) << "\n";
}

ValHook make_val_hook(const json& data, std::vector<ClassIndexedDataset>& storage) {
  if (!data.contains("val_cache")) return nullptr;
  storage.push_back(load_cache(data.at("val_cache").get<std::string>()));
  const ClassIndexedDataset* val_ds = &storage.back();
  EpisodeSpec spec;
  if (data.contains("val")) spec = parse_episodes(data.at("val"));
  return [val_ds, spec](Model<float>& model) {
    auto episodes = build_episodes(*val_ds, spec.way, spec.queries_per_class, spec.runs, spec.seed);
    return evaluate(model, episodes).mean;
  };
}

ProgressFn make_progress(int64_t max_iterations) {
  const int64_t every = std::max<int64_t>(1, max_iterations / 20);
  return [every, max_iterations](const MetricsRow& row) {
    if ((row.iteration + 1) % every != 0 && row.iteration + 1 != max_iterations) return;
    std::printf("iter %lld/%lld  loss %.4f  lr %.3g", (long long)(row.iteration + 1),
                (long long)max_iterations, row.total_loss, row.lr);
    if (row.val_accuracy) std::printf("  val %.4f", *row.val_accuracy);
    std::printf("\n");
    std::fflush(stdout);
  };
}

// ---- commands -------------------------------------------------------

int cmd_ingest(const std::string& kind, const std::string& root, const std::string& manifest,
               const std::string& out, int downsample, int natural_size) {
  ClassIndexedDataset ds;
  IngestReport report;
  if (kind == "omniglot") {
    ds = ingest_omniglot_dir(root, downsample, &report);
  } else if (kind == "natural") {
    if (manifest.empty()) throw ConfigError("ingest: natural datasets need --manifest");
    ds = ingest_natural(root, manifest, natural_size, &report);
  } else {
    throw ConfigError("ingest: unknown kind '" + kind + "' (omniglot|natural)");
  }
  save_cache(out, ds);

  std::string summary = "kind: " + kind + "\nclasses: " + std::to_string(ds.classes.size()) +
                        "\nimages: " + std::to_string(ds.total_images()) + "\nshape: " +
                        std::to_string(ds.channels) + "x" + std::to_string(ds.height) + "x" +
                        std::to_string(ds.width) + "\n";
  for (const auto& w : report.warnings) summary += "warning: " + w + "\n";
  std::ofstream(out + ".summary.txt", std::ios::trunc) << summary;
  std::cout << summary;

  json resolved;
  resolved["command"] = "ingest";
  resolved["kind"] = kind;
  resolved["root"] = root;
  if (!manifest.empty()) resolved["manifest"] = manifest;
  resolved["out"] = out;
  resolved["downsample"] = downsample;
  if (kind == "natural") resolved["size"] = natural_size;
  std::ofstream(out + ".resolved.json", std::ios::trunc) << resolved.dump(2) << "\n";
  return 0;
}

int cmd_synth(int classes, int per_class, int size, uint64_t seed, int first_id,
              const std::string& out) {
  ClassIndexedDataset ds = make_glyph_dataset(classes, per_class, size, seed, first_id);
  save_cache(out, ds);
  std::cout << "classes: " << ds.classes.size() << "\nimages: " << ds.total_images()
            << "\nshape: " << ds.channels << "x" << ds.height << "x" << ds.width << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_override, bool deterministic,
              int threads) {
  json root = load_json(config_path);
  reject_unknown_keys(root, {"arch", "data", "train", "augment", "resume", "output_dir"}, "config");
  if (!root.contains("arch")) throw ConfigError("train config: missing arch");
  if (!root.contains("data")) throw ConfigError("train config: missing data");
  const json& data = root.at("data");
  reject_unknown_keys(data, {"base_cache", "val_cache", "val"}, "data");
  if (!data.contains("base_cache")) throw ConfigError("train config: missing data.base_cache");

  ArchConfig arch = parse_arch(root.at("arch"));
  TrainConfig cfg = root.contains("train") ? parse_train(root.at("train")) : TrainConfig{};
  std::string objective = "triplet";
  if (root.contains("train")) objective = root.at("train").value("objective", objective);
  if (objective != "triplet" && objective != "siamese")
    throw ConfigError("train config: objective must be triplet or siamese");
  AugmentParams aug =
      root.contains("augment") ? parse_augment(root.at("augment")) : AugmentParams{};
  cfg.deterministic = deterministic;
  if (threads > 0) set_max_threads(threads);

  std::string out_dir = root.value("output_dir", std::string("run"));
  if (!out_override.empty()) out_dir = out_override;

  ResumePoint resume;
  const ResumePoint* resume_ptr = nullptr;
  if (root.contains("resume")) {
    reject_unknown_keys(root.at("resume"), {"model", "state"}, "resume");
    resume.model_path = root.at("resume").at("model").get<std::string>();
    resume.state_path = root.at("resume").at("state").get<std::string>();
    resume_ptr = &resume;
  }

  ClassIndexedDataset base = load_cache(data.at("base_cache").get<std::string>());
  std::vector<ClassIndexedDataset> storage;
  ValHook val = make_val_hook(data, storage);

  json resolved;
  resolved["command"] = "train";
  resolved["arch"] = arch_to_json(arch);
  resolved["data"] = data;
  resolved["train"] = train_to_json(cfg, objective);
  resolved["augment"] = augment_to_json(aug);
  resolved["output_dir"] = out_dir;
  resolved["deterministic"] = deterministic;
  if (resume_ptr) resolved["resume"] = {{"model", resume.model_path}, {"state", resume.state_path}};
  write_resolved_config(out_dir, resolved);

  TrainOutput out;
  if (objective == "siamese")
    out = train_siamese(base, arch, cfg, aug, out_dir, val, make_progress(cfg.max_iterations));
  else
    out = train_triplet(base, arch, cfg, aug, out_dir, val, resume_ptr,
                        make_progress(cfg.max_iterations));
  std::cout << "checkpoint: " << out.checkpoint_path << "\n";
  return 0;
}

int cmd_finetune(const std::string& config_path, const std::string& out_override,
                 bool deterministic, int threads) {
  json root = load_json(config_path);
  reject_unknown_keys(root, {"finetune", "data", "train", "augment", "output_dir"}, "config");
  if (!root.contains("finetune")) throw ConfigError("finetune config: missing finetune section");
  const json& ft = root.at("finetune");
  reject_unknown_keys(ft, {"checkpoint", "novel_cache", "oneshot_seed"}, "finetune");
  if (!root.contains("data")) throw ConfigError("finetune config: missing data");
  const json& data = root.at("data");
  reject_unknown_keys(data, {"base_cache", "val_cache", "val"}, "data");

  TrainConfig cfg = root.contains("train") ? parse_train(root.at("train")) : TrainConfig{};
  AugmentParams aug =
      root.contains("augment") ? parse_augment(root.at("augment")) : AugmentParams{};
  cfg.deterministic = deterministic;
  if (threads > 0) set_max_threads(threads);

  std::string out_dir = root.value("output_dir", std::string("finetune_run"));
  if (!out_override.empty()) out_dir = out_override;

  ClassIndexedDataset base = load_cache(data.at("base_cache").get<std::string>());
  ClassIndexedDataset novel = load_cache(ft.at("novel_cache").get<std::string>());
  const uint64_t oneshot_seed = ft.value("oneshot_seed", uint64_t(0));
  auto [oneshot, pool] = extract_oneshot(novel, oneshot_seed);
  if (oneshot.items.size() < 2)
    throw ConfigError("finetune: need at least two one-shot classes");

  std::vector<ClassIndexedDataset> storage;
  ValHook val = make_val_hook(data, storage);

  json resolved;
  resolved["command"] = "finetune";
  resolved["finetune"] = {{"checkpoint", ft.at("checkpoint").get<std::string>()},
                          {"novel_cache", ft.at("novel_cache").get<std::string>()},
                          {"oneshot_seed", oneshot_seed}};
  resolved["data"] = data;
  resolved["train"] = train_to_json(cfg, "triplet");
  resolved["augment"] = augment_to_json(aug);
  resolved["output_dir"] = out_dir;
  resolved["deterministic"] = deterministic;
  write_resolved_config(out_dir, resolved);

  TrainOutput out = finetune_triplet(ft.at("checkpoint").get<std::string>(), base, oneshot, cfg,
                                     aug, out_dir, val, make_progress(cfg.max_iterations));
  std::cout << "checkpoint: " << out.checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& out_override,
             const std::string& layer_override, bool deterministic, int threads) {
  json root = load_json(config_path);
  reject_unknown_keys(root, {"checkpoint", "data", "episodes", "layer", "output_dir"}, "config");
  if (!root.contains("checkpoint")) throw ConfigError("eval config: missing checkpoint");
  if (!root.contains("data")) throw ConfigError("eval config: missing data");
  const json& data = root.at("data");
  reject_unknown_keys(data, {"cache", "fixed_root", "downsample"}, "data");
  if (deterministic || threads > 0) set_max_threads(deterministic ? 1 : threads);

  std::string layer = root.value("layer", std::string("fc-1"));
  if (!layer_override.empty()) layer = layer_override;
  std::string out_dir = root.value("output_dir", std::string("eval_run"));
  if (!out_override.empty()) out_dir = out_override;

  LoadedModel<float> lm = load_model<float>(root.at("checkpoint").get<std::string>());

  std::vector<Episode> episodes;
  EpisodeSpec spec;
  if (data.contains("fixed_root")) {
    episodes = load_fixed_episodes(data.at("fixed_root").get<std::string>(),
                                   data.value("downsample", 0));
  } else {
    if (!data.contains("cache")) throw ConfigError("eval config: data needs cache or fixed_root");
    ClassIndexedDataset novel = load_cache(data.at("cache").get<std::string>());
    spec = root.contains("episodes") ? parse_episodes(root.at("episodes")) : EpisodeSpec{};
    if (spec.oneshot_seed) {
      auto [oneshot, pool] = extract_oneshot(novel, *spec.oneshot_seed);
      episodes = build_episodes_from_oneshot(oneshot, pool, spec.way, spec.queries_per_class,
                                             spec.runs, spec.seed);
    } else {
      episodes = build_episodes(novel, spec.way, spec.queries_per_class, spec.runs, spec.seed);
    }
  }

  json resolved;
  resolved["command"] = "eval";
  resolved["checkpoint"] = root.at("checkpoint");
  resolved["data"] = data;
  if (!data.contains("fixed_root")) resolved["episodes"] = episodes_to_json(spec);
  resolved["layer"] = layer;
  resolved["output_dir"] = out_dir;
  resolved["deterministic"] = deterministic;
  write_resolved_config(out_dir, resolved);

  EvalReport report = evaluate(lm.model, episodes, layer);
  write_report_csv(out_dir + "/report.csv", report);
  std::printf("runs: %d\nmean_accuracy: %.6f\n", report.runs, report.mean);
  if (report.tie_fraction > 0)
    std::printf("warning: %.1f%% of predictions fell to the tie rule (degenerate embedding?)\n",
                100.0 * report.tie_fraction);
  return 0;
}

int cmd_project(const std::string& config_path, const std::string& out_override,
                bool deterministic, int threads) {
  json root = load_json(config_path);
  reject_unknown_keys(root, {"checkpoint", "data", "classes", "layer", "output_dir"}, "config");
  if (!root.contains("checkpoint")) throw ConfigError("project config: missing checkpoint");
  if (!root.contains("data")) throw ConfigError("project config: missing data");
  const json& data = root.at("data");
  reject_unknown_keys(data, {"cache"}, "data");
  if (!root.contains("classes")) throw ConfigError("project config: missing classes");
  if (deterministic || threads > 0) set_max_threads(deterministic ? 1 : threads);

  std::string out_dir = root.value("output_dir", std::string("projection"));
  if (!out_override.empty()) out_dir = out_override;
  const std::string layer = root.value("layer", std::string("fc-1"));

  LoadedModel<float> lm = load_model<float>(root.at("checkpoint").get<std::string>());
  ClassIndexedDataset ds = load_cache(data.at("cache").get<std::string>());
  const auto class_ids = root.at("classes").get<std::vector<int>>();
  if (class_ids.empty()) throw ConfigError("project config: classes is empty");

  std::vector<Tensor<float>> images;
  std::vector<int> labels;
  for (int id : class_ids) {
    const auto& cls = ds.class_by_id(id);
    for (const auto& img : cls.images) {
      images.push_back(eval_view(ds, img, lm.model.arch.in_height));
      labels.push_back(id);
    }
  }

  Tensor<float> feats = layer_features_batch(lm.model, stack_images(images), layer);
  const int rows = feats.dim(0), cols = feats.dim(1);
  std::vector<double> matrix(size_t(rows) * size_t(cols));
  for (int64_t i = 0; i < feats.numel(); ++i) matrix[size_t(i)] = double(feats.data()[i]);
  PcaResult pca = pca_project(matrix, rows, cols, 2);

  json resolved;
  resolved["command"] = "project";
  resolved["checkpoint"] = root.at("checkpoint");
  resolved["data"] = data;
  resolved["classes"] = class_ids;
  resolved["layer"] = layer;
  resolved["output_dir"] = out_dir;
  write_resolved_config(out_dir, resolved);

  std::ofstream os(out_dir + "/projection.csv", std::ios::trunc);
  if (!os) throw DataError("cannot write projection under " + out_dir);
  os << "point,class,x,y\n";
  char buf[64];
  for (int r = 0; r < rows; ++r) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.10g,%.10g", r, labels[size_t(r)],
                  pca.coords[size_t(r) * 2], pca.coords[size_t(r) * 2 + 1]);
    os << buf << "\n";
  }
  json meta;
  meta["explained_variance"] = pca.explained;
  meta["points"] = rows;
  meta["layer"] = layer;
  std::ofstream(out_dir + "/projection_meta.json", std::ios::trunc) << meta.dump(2) << "\n";
  std::printf("points: %d\nexplained_variance: %.4f %.4f\n", rows, pca.explained[0],
              pca.explained[1]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"triplet ranking embeddings for one-shot recognition"};
  app.require_subcommand(1);

  bool deterministic = false;
  int threads = 0;
  app.add_flag("--deterministic", deterministic,
               "single-threaded numeric paths, zeroed wall-clock columns");
  app.add_option("--threads", threads, "cap worker threads");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "decode an image corpus into a dataset cache");
  std::string kind, root, manifest, out = "dataset.tnds";
  int downsample = 0, natural_size = 132;
  ingest->add_option("--kind", kind, "omniglot | natural")->required();
  ingest->add_option("--root", root, "corpus root directory")->required();
  ingest->add_option("--manifest", manifest, "natural: manifest of path,class_id[,name] lines");
  ingest->add_option("--downsample", downsample, "omniglot: resize to NxN at load time");
  ingest->add_option("--size", natural_size, "natural: resize target (default 132)");
  ingest->add_option("--out", out, "cache file to write")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic glyph dataset cache");
  int s_classes = 30, s_per = 20, s_size = 28, s_first = 0;
  uint64_t s_seed = 0;
  std::string s_out = "synthetic.tnds";
  synth->add_option("--classes", s_classes, "number of classes");
  synth->add_option("--per-class", s_per, "images per class");
  synth->add_option("--image-size", s_size, "square image size");
  synth->add_option("--seed", s_seed, "generator seed");
  synth->add_option("--first-id", s_first, "first class id");
  synth->add_option("--out", s_out, "cache file to write")->required();

  // config-driven commands
  std::string cfg_path, out_dir_override, layer_override;
  auto add_cfg = [&](CLI::App* cmd, bool with_layer = false) {
    cmd->add_option("--config", cfg_path, "json run config")->required();
    cmd->add_option("--out", out_dir_override, "override the output directory");
    if (with_layer) cmd->add_option("--layer", layer_override, "feature source layer");
  };
  auto* train = app.add_subcommand("train", "pre-train an embedding model on base classes");
  add_cfg(train);
  auto* finetune = app.add_subcommand("finetune", "fine-tune with one-shot synthetic triplets");
  add_cfg(finetune);
  auto* evaluate_cmd = app.add_subcommand("eval", "episode accuracy of a checkpoint");
  add_cfg(evaluate_cmd, true);
  auto* project = app.add_subcommand("project", "2-d PCA export of class embeddings");
  add_cfg(project);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (deterministic) set_max_threads(1);
    if (*ingest) return cmd_ingest(kind, root, manifest, out, downsample, natural_size);
    if (*synth) return cmd_synth(s_classes, s_per, s_size, s_seed, s_first, s_out);
    if (*train) return cmd_train(cfg_path, out_dir_override, deterministic, threads);
    if (*finetune) return cmd_finetune(cfg_path, out_dir_override, deterministic, threads);
    if (*evaluate_cmd)
      return cmd_eval(cfg_path, out_dir_override, layer_override, deterministic, threads);
    if (*project) return cmd_project(cfg_path, out_dir_override, deterministic, threads);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
