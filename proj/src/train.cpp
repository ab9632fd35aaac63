#include "tripletnet/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tripletnet {

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string metrics_line(const MetricsRow& r) {
  std::string line = std::to_string(r.iteration) + "," + fmt_g(r.lr) + "," +
                     fmt_g(r.batch_loss) + "," + fmt_g(r.reg_loss) + "," + fmt_g(r.total_loss) +
                     "," + fmt_g(r.wall_ms) + ",";
  if (r.val_accuracy) line += fmt_g(*r.val_accuracy);
  return line;
}

constexpr const char* kMetricsHeader = "iteration,lr,batch_loss,reg_loss,total_loss,wall_ms,val_accuracy";

class MetricsWriter {
 public:
  MetricsWriter(const std::string& out_dir, bool append) {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    path_ = out_dir + "/metrics.csv";
    const bool fresh = !append || !std::filesystem::exists(path_);
    os_.open(path_, fresh ? std::ios::trunc : std::ios::app);
    if (!os_) throw DataError("cannot open metrics log: " + path_);
    if (fresh) os_ << kMetricsHeader << "\n";
  }

  void row(const MetricsRow& r) {
    if (!os_.is_open()) return;
    os_ << metrics_line(r) << "\n";
    os_.flush();
  }

 private:
  std::string path_;
  std::ofstream os_;
};

struct StepResult {
  Tensor<float> total;
  double batch_loss = 0;
  double reg_loss = 0;
};

using StepFn = std::function<StepResult(int64_t iteration, Tape<float>&)>;

/// Shared iteration loop: gradients, Adam with the halving schedule,
/// metrics, periodic validation and checkpoints, final save.
TrainOutput run_loop(Model<float> model, std::vector<NamedTensor<float>> params,
                     std::vector<NamedTensor<float>> extra_saved, const std::string& kind,
                     const TrainConfig& cfg, const StepFn& step, const std::string& out_dir,
                     const ValHook& val, const ResumePoint* resume, const ProgressFn& progress) {
  cfg.validate();
  if (cfg.deterministic) set_max_threads(1);

  AdamState<float> adam = AdamState<float>::init(params);
  int64_t start_iter = 0;
  if (resume) {
    RunState<float> rs = load_run_state<float>(resume->state_path);
    start_iter = rs.next_iteration;
    adam.t = rs.adam_t;
    if (rs.moment1.size() != params.size() || rs.moment2.size() != params.size())
      throw DataError("run state does not match the parameter list");
    for (size_t i = 0; i < params.size(); ++i) {
      if (rs.moment1[i].tensor.shape() != params[i].tensor.shape())
        throw DataError("run state shape mismatch for " + params[i].name);
      adam.m[i] = rs.moment1[i].tensor;
      adam.v[i] = rs.moment2[i].tensor;
    }
  }

  TrainOutput out;
  out.model = model;
  MetricsWriter metrics(out_dir, resume != nullptr);

  auto save_state_files = [&](const std::string& stem, int64_t next_iter) {
    if (out_dir.empty()) return std::string();
    const std::string model_path = out_dir + "/" + stem + ".tnck";
    save_model(model_path, model, kind, extra_saved);
    RunState<float> rs;
    rs.next_iteration = next_iter;
    rs.adam_t = adam.t;
    for (size_t i = 0; i < params.size(); ++i) {
      rs.moment1.push_back({params[i].name, adam.m[i]});
      rs.moment2.push_back({params[i].name, adam.v[i]});
    }
    save_run_state(out_dir + "/" + stem + ".tnrs", rs);
    return model_path;
  };

  for (int64_t iter = start_iter; iter < cfg.max_iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    for (auto& p : params) p.tensor.zero_grad();

    Tape<float> tape;
    StepResult sr = step(iter, tape);
    const double total = double(sr.total.scalar());
    if (!std::isfinite(total))
      throw NumericError("non-finite loss at iteration " + std::to_string(iter) +
                         " (last checkpoint retained)");
    tape.backward(sr.total);

    const double lr = lr_schedule(cfg, cfg.schedule_offset + iter);
    try {
      adam_step(params, adam, float(lr));
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(iter) +
                         " (last checkpoint retained)");
    }

    MetricsRow row;
    row.iteration = iter;
    row.lr = lr;
    row.batch_loss = sr.batch_loss;
    row.reg_loss = sr.reg_loss;
    row.total_loss = total;
    const auto t1 = std::chrono::steady_clock::now();
    row.wall_ms =
        cfg.deterministic ? 0.0 : std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (val && cfg.eval_every > 0 && (iter + 1) % cfg.eval_every == 0)
      row.val_accuracy = val(model);
    metrics.row(row);
    out.metrics.push_back(row);
    if (progress) progress(row);

    if (cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0 &&
        iter + 1 < cfg.max_iterations)
      save_state_files("checkpoint_iter" + std::to_string(iter + 1), iter + 1);
  }

  out.checkpoint_path = save_state_files("model", cfg.max_iterations);
  return out;
}

Tensor<float> tower(const std::vector<Triplet>& items, int which) {
  std::vector<Tensor<float>> imgs;
  imgs.reserve(items.size());
  for (const auto& t : items) imgs.push_back(which == 0 ? t.pos1 : which == 1 ? t.pos2 : t.neg);
  return stack_images(imgs);
}

}  // namespace

uint64_t batch_seed_for(TrainPhase phase, uint64_t run_seed, int64_t iteration) {
  const uint64_t tag = phase == TrainPhase::kPretrain    ? 0x7261696e
                       : phase == TrainPhase::kFinetune  ? 0x66696e65
                                                         : 0x7369616d;
  return mix_seed(mix_seed(run_seed, tag), uint64_t(iteration));
}

TrainOutput train_triplet(const ClassIndexedDataset& base, const ArchConfig& arch,
                          const TrainConfig& cfg, const AugmentParams& aug,
                          const std::string& out_dir, const ValHook& val,
                          const ResumePoint* resume, const ProgressFn& progress) {
  Model<float> model;
  if (resume) {
    LoadedModel<float> lm = load_model<float>(resume->model_path);
    if (lm.kind != "triplet") throw DataError("resume checkpoint is not a triplet model");
    if (!(lm.model.arch == arch)) throw DataError("resume checkpoint architecture mismatch");
    model = std::move(lm.model);
  } else {
    model = build_network<float>(arch);
    he_init(model, cfg.seed);
  }

  auto params = model.parameters();
  const LossConfig loss_cfg{cfg.margin, cfg.lambda};
  Model<float>* mp = &model;
  StepFn step = [&base, &aug, &cfg, loss_cfg, mp](int64_t iter, Tape<float>& tape) {
    const uint64_t batch_seed = batch_seed_for(TrainPhase::kPretrain, cfg.seed, iter);
    TripletBatch batch = sample_triplet_batch(base, aug, cfg.batch_size, batch_seed);
    Tensor<float> h1 = embed(*mp, tower(batch.items, 0), Mode::kTrain, &tape);
    Tensor<float> h2 = embed(*mp, tower(batch.items, 1), Mode::kTrain, &tape);
    Tensor<float> hn = embed(*mp, tower(batch.items, 2), Mode::kTrain, &tape);
    LossParts<float> parts = total_loss_parts(h1, h2, hn, loss_cfg, &tape);
    return StepResult{parts.total, double(parts.batch.scalar()), double(parts.reg.scalar())};
  };

  return run_loop(model, std::move(params), {}, "triplet", cfg, step, out_dir, val, resume,
                  progress);
}

TrainOutput finetune_triplet(const std::string& checkpoint_path, const ClassIndexedDataset& base,
                             const OneShotSet& oneshot, const TrainConfig& cfg,
                             const AugmentParams& aug, const std::string& out_dir,
                             const ValHook& val, const ProgressFn& progress) {
  LoadedModel<float> lm = load_model<float>(checkpoint_path);
  if (lm.kind != "triplet") throw DataError("fine-tuning expects a triplet checkpoint");
  Model<float> model = std::move(lm.model);
  if (oneshot.items.size() < 2)
    throw ValueError("fine-tuning needs at least two one-shot instances");

  auto params = model.parameters();
  const LossConfig loss_cfg{cfg.margin, cfg.lambda};
  Model<float>* mp = &model;
  StepFn step = [&base, &oneshot, &aug, &cfg, loss_cfg, mp](int64_t iter, Tape<float>& tape) {
    const uint64_t batch_seed = batch_seed_for(TrainPhase::kFinetune, cfg.seed, iter);
    TripletBatch batch = sample_finetune_batch(base, oneshot, aug, cfg.batch_size, batch_seed);
    Tensor<float> h1 = embed(*mp, tower(batch.items, 0), Mode::kTrain, &tape);
    Tensor<float> h2 = embed(*mp, tower(batch.items, 1), Mode::kTrain, &tape);
    Tensor<float> hn = embed(*mp, tower(batch.items, 2), Mode::kTrain, &tape);
    LossParts<float> parts = total_loss_parts(h1, h2, hn, loss_cfg, &tape);
    return StepResult{parts.total, double(parts.batch.scalar()), double(parts.reg.scalar())};
  };

  return run_loop(model, std::move(params), {}, "triplet", cfg, step, out_dir, val, nullptr,
                  progress);
}

TrainOutput train_siamese(const ClassIndexedDataset& base, const ArchConfig& arch,
                          const TrainConfig& cfg, const AugmentParams& aug,
                          const std::string& out_dir, const ValHook& val,
                          const ProgressFn& progress) {
  Model<float> model = build_network<float>(arch);
  he_init(model, cfg.seed);
  SiameseHead<float> head = SiameseHead<float>::init();

  auto params = model.parameters();
  params.push_back({"siamese.weight", head.weight});
  params.push_back({"siamese.bias", head.bias});
  std::vector<NamedTensor<float>> extra = {{"siamese.weight", head.weight},
                                           {"siamese.bias", head.bias}};

  Model<float>* mp = &model;
  SiameseHead<float>* hp = &head;
  StepFn step = [&base, &aug, &cfg, mp, hp](int64_t iter, Tape<float>& tape) {
    const uint64_t batch_seed = batch_seed_for(TrainPhase::kSiamese, cfg.seed, iter);
    PairBatch batch = sample_pair_batch(base, aug, cfg.batch_size, batch_seed);
    std::vector<Tensor<float>> as, bs;
    std::vector<bool> labels;
    for (const auto& p : batch.items) {
      as.push_back(p.a);
      bs.push_back(p.b);
      labels.push_back(p.same);
    }
    Tensor<float> ha = embed(*mp, stack_images(as), Mode::kTrain, &tape);
    Tensor<float> hb = embed(*mp, stack_images(bs), Mode::kTrain, &tape);
    Tensor<float> loss = siamese_batch_loss(ha, hb, labels, *hp, &tape);
    return StepResult{loss, double(loss.scalar()), 0.0};
  };

  TrainOutput out = run_loop(model, std::move(params), extra, "siamese", cfg, step, out_dir, val,
                             nullptr, progress);
  out.head = head;
  return out;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows, bool append) {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw DataError("cannot open metrics log: " + path);
  if (!append) os << kMetricsHeader << "\n";
  for (const auto& r : rows) os << metrics_line(r) << "\n";
  if (!os) throw DataError("write failed: " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open metrics log: " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    std::istringstream ss(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(ss, field, ',')) field.clear();
      return field;
    };
    r.iteration = std::stoll(next());
    r.lr = std::stod(next());
    r.batch_loss = std::stod(next());
    r.reg_loss = std::stod(next());
    r.total_loss = std::stod(next());
    r.wall_ms = std::stod(next());
    const std::string v = next();
    if (!v.empty()) r.val_accuracy = std::stod(v);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace tripletnet
