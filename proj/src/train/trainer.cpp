#include "samlab/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "samlab/model/checkpoint.hpp"

namespace fs = std::filesystem;

namespace samlab {

Strategy strategy_from_string(const std::string& s) {
  if (s == "random") return Strategy::kRandom;
  if (s == "amt") return Strategy::kAmt;
  if (s == "sam") return Strategy::kSam;
  throw Error("unknown strategy '" + s + "' (expected random, amt or sam)");
}

std::string strategy_to_string(Strategy s) {
  switch (s) {
    case Strategy::kRandom: return "random";
    case Strategy::kAmt: return "amt";
    case Strategy::kSam: return "sam";
  }
  return "sam";
}

void TrainRunConfig::validate() const {
  check(epochs >= 1, "config: epochs must be >= 1");
  check(warmup_epochs >= 0 && warmup_epochs <= epochs, "config: warmup_epochs must be in [0, epochs]");
  check(weight_update_interval >= 1, "config: weight_update_interval must be >= 1");
  check(batch_size >= 1, "config: batch_size must be >= 1");
  check(base_lr > 0.0, "config: base_lr must be positive");
  check(ratios.mask_ratio >= 0.0 && ratios.throw_ratio >= 0.0 && ratios.mask_ratio + ratios.throw_ratio <= 1.0,
        "config: require r >= 0, t >= 0 and r + t <= 1");
  check(loss.lambda_cls >= 0.0, "config: lambda must be nonnegative");
  check(layerwise_lr_decay > 0.0 && layerwise_lr_decay <= 1.0, "config: layerwise_lr_decay must be in (0, 1]");
}

nlohmann::json EpochMetrics::to_json() const {
  nlohmann::json j{{"epoch", epoch}, {"l_con", l_con},        {"l_cls", l_cls},
                   {"l_total", l_total}, {"lr", lr}, {"wall_time_s", wall_time_s}};
  if (train_acc) j["train_acc"] = *train_acc;
  if (val_acc) j["val_acc"] = *val_acc;
  return j;
}

nlohmann::json EvalReport::to_json() const {
  return nlohmann::json{{"top1", top1},
                        {"per_class_acc", per_class_acc},
                        {"mean_per_class_acc", mean_per_class_acc},
                        {"confusion", confusion},
                        {"count", count}};
}

nlohmann::json patch_config_to_json(const PatchConfig& cfg) {
  return nlohmann::json{{"image_h", cfg.image_h},         {"image_w", cfg.image_w},
                        {"patch_size", cfg.patch_size},   {"embed_dim", cfg.embed_dim},
                        {"num_heads", cfg.num_heads},     {"encoder_depth", cfg.encoder_depth},
                        {"decoder_dim", cfg.decoder_dim}, {"decoder_depth", cfg.decoder_depth},
                        {"decoder_heads", cfg.decoder_heads}, {"num_classes", cfg.num_classes}};
}

PatchConfig patch_config_from_json(const nlohmann::json& j) {
  PatchConfig cfg;
  cfg.image_h = j.at("image_h").get<int>();
  cfg.image_w = j.at("image_w").get<int>();
  cfg.patch_size = j.at("patch_size").get<int>();
  cfg.embed_dim = j.at("embed_dim").get<int>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.encoder_depth = j.at("encoder_depth").get<int>();
  cfg.decoder_dim = j.at("decoder_dim").get<int>();
  cfg.decoder_depth = j.at("decoder_depth").get<int>();
  cfg.decoder_heads = j.at("decoder_heads").get<int>();
  cfg.num_classes = j.at("num_classes").get<int>();
  return cfg;
}

void save_model_checkpoint(const std::string& path, MaskedAutoencoder& model, const std::string& phase, int epoch,
                           uint64_t seed, const Dataset* ds) {
  nlohmann::json meta{{"phase", phase}, {"epoch", epoch}, {"seed", seed}, {"config", patch_config_to_json(model.config())}};
  if (ds) {
    meta["channel_mean"] = ds->channel_mean;
    meta["channel_std"] = ds->channel_std;
  }
  save_checkpoint(path, model.params(), meta);
}

namespace {

AugmentPolicy eval_policy(const PatchConfig& cfg) {
  AugmentPolicy p;
  p.kind = AugmentPolicy::Kind::kEval;
  p.out_size = cfg.image_h;
  return p;
}

AugmentPolicy train_policy(const PatchConfig& cfg) {
  AugmentPolicy p;
  p.kind = AugmentPolicy::Kind::kTrain;
  p.out_size = cfg.image_h;
  return p;
}

Mat patchify_normalized(const Dataset& ds, const std::vector<Image>& images, const PatchConfig& cfg) {
  ImageBatch batch;
  batch.images.reserve(images.size());
  for (const Image& img : images) batch.images.push_back(ds.normalized(img));
  batch.labels.assign(images.size(), 0);
  return MaskedAutoencoder::patchify(batch, cfg);
}

void append_metric_line(const std::string& run_dir, const EpochMetrics& m) {
  if (run_dir.empty()) return;
  std::ofstream out(fs::path(run_dir) / "metrics.jsonl", std::ios::app);
  out << m.to_json().dump() << "\n";
}

void write_nan_diagnostic(const std::string& run_dir, const std::string& phase, int epoch, int step, double l_con,
                          double l_cls) {
  if (run_dir.empty()) return;
  nlohmann::json j{{"event", "nan_loss"}, {"phase", phase}, {"epoch", epoch},
                   {"step", step},        {"l_con", l_con}, {"l_cls", l_cls}};
  std::ofstream out(fs::path(run_dir) / "diagnostic.json");
  out << j.dump(2) << "\n";
}

std::string checkpoint_path(const std::string& run_dir, int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%04d.ckpt", epoch);
  return (fs::path(run_dir) / "checkpoints" / buf).string();
}

void ensure_run_dirs(const std::string& run_dir) {
  if (run_dir.empty()) return;
  fs::create_directories(fs::path(run_dir) / "checkpoints");
}

}  // namespace

void update_masking_weights(MaskedAutoencoder& model, const Dataset& ds, const std::vector<size_t>& indices,
                            int epoch, WeightCache& cache, int batch_size) {
  const PatchConfig& cfg = model.config();
  const AugmentPolicy eval_pol = eval_policy(cfg);
  Rng dummy(0);  // eval policy is deterministic, rng is unused entropy

  for (size_t start = 0; start < indices.size(); start += batch_size) {
    const size_t end = std::min(indices.size(), start + batch_size);
    std::vector<Image> views;
    views.reserve(end - start);
    for (size_t k = start; k < end; ++k) {
      const LesionSample& s = ds.samples[indices[k]];
      views.push_back(apply_record(s.image, sample_augmentation(s.image, eval_pol, dummy)));
    }
    const Mat patches = patchify_normalized(ds, views, cfg);
    const EncoderOutput enc = model.forward_all_tokens(patches, static_cast<int>(views.size()));
    for (size_t k = start; k < end; ++k) {
      const LesionSample& s = ds.samples[indices[k]];
      const auto weights =
          extract_masking_weights(enc.last_attention, static_cast<int>(k - start), cfg.num_patches());
      cache.put(weights_to_pixel_map(weights, cfg, s.image.h, s.image.w, s.image_id, epoch));
    }
  }
}

namespace {

// Builds per-image partitions for one pre-training batch.
std::vector<TokenPartition> build_partitions(const Dataset& ds, const std::vector<size_t>& ids,
                                             const std::vector<AugmentationRecord>& records, const PatchConfig& cfg,
                                             const TrainRunConfig& cfg_run, Strategy strategy, bool warmed_up,
                                             const WeightCache& cache, Rng& rng) {
  std::vector<TokenPartition> parts;
  parts.reserve(ids.size());
  const int n = cfg.num_patches();
  for (size_t k = 0; k < ids.size(); ++k) {
    const LesionSample& s = ds.samples[ids[k]];
    const bool guided = strategy != Strategy::kRandom && warmed_up && cache.contains(s.image_id);
    if (!guided) {
      parts.push_back(random_partition(n, cfg_run.ratios, rng));
      continue;
    }
    const auto weights = pixel_map_to_patch_weights(cache.get(s.image_id), records[k], cfg);
    const SampleIndex order = sample_indices(weights, cfg_run.sample_mode, rng);
    parts.push_back(partition(order, cfg_run.ratios, n));
  }
  return parts;
}

}  // namespace

TrainResult pretrain(MaskedAutoencoder& model, const Dataset& ds, const TrainRunConfig& cfg, Strategy strategy,
                     WeightCache& cache, const std::string& run_dir, const StepObserver& observer) {
  cfg.validate();
  check(!ds.train_indices.empty(), "pretrain: dataset has no training split");
  ensure_run_dirs(run_dir);

  const PatchConfig& mcfg = model.config();
  AdamW opt(model.pretrain_params(), 0.9, 0.95, cfg.weight_decay);
  Rng root(cfg.seed);
  const AugmentPolicy train_pol = train_policy(mcfg);
  const AugmentPolicy eval_pol = eval_policy(mcfg);

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool warmed_up = epoch >= cfg.warmup_epochs;
    if (strategy != Strategy::kRandom && warmed_up && (epoch - cfg.warmup_epochs) % cfg.weight_update_interval == 0) {
      update_masking_weights(model, ds, ds.train_indices, epoch, cache, cfg.batch_size);
      if (!run_dir.empty()) save_model_checkpoint(checkpoint_path(run_dir, epoch), model, "pretrain", epoch, cfg.seed, &ds);
    }

    std::vector<size_t> order = ds.train_indices;
    Rng shuffle_rng = root.fork(0x51000000ull + epoch);
    shuffle_rng.shuffle(order);
    Rng step_rng = root.fork(0x52000000ull + epoch);

    double sum_con = 0.0, sum_cls = 0.0, sum_total = 0.0, last_lr = 0.0;
    int steps = 0;
    const int total_steps = static_cast<int>((order.size() + cfg.batch_size - 1) / cfg.batch_size);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<size_t> ids(order.begin() + start, order.begin() + end);

      std::vector<Image> views;
      std::vector<AugmentationRecord> records;
      std::vector<int> labels;
      views.reserve(ids.size());
      for (size_t id : ids) {
        const LesionSample& s = ds.samples[id];
        const AugmentationRecord rec =
            sample_augmentation(s.image, cfg.augment_train ? train_pol : eval_pol, step_rng);
        records.push_back(rec);
        views.push_back(apply_record(s.image, rec));
        labels.push_back(s.label);
      }

      const auto parts = build_partitions(ds, ids, records, mcfg, cfg, strategy, warmed_up, cache, step_rng);
      const Mat patches = patchify_normalized(ds, views, mcfg);
      const auto out = model.forward_pretrain(patches, static_cast<int>(ids.size()), parts, labels, cfg.loss);

      if (!std::isfinite(out.l_total)) {
        write_nan_diagnostic(run_dir, "pretrain", epoch, steps, out.l_con, out.l_cls);
        throw Error("pretrain: non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(steps));
      }

      model.params().zero_grad();
      model.backward_pretrain();
      const double frac = epoch + static_cast<double>(steps) / total_steps;
      last_lr = cosine_lr(cfg.base_lr, frac, cfg.warmup_epochs, cfg.epochs);
      opt.step(last_lr);

      sum_con += out.l_con;
      sum_cls += out.l_cls;
      sum_total += out.l_total;
      ++steps;
      if (observer) {
        StepTrace trace;
        trace.epoch = epoch;
        trace.step = steps - 1;
        trace.sample_indices = &ids;
        trace.partitions = &parts;
        trace.patches = &patches;
        trace.labels = &labels;
        trace.l_con = out.l_con;
        trace.l_cls = out.l_cls;
        trace.l_total = out.l_total;
        observer(trace);
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.l_con = sum_con / steps;
    m.l_cls = sum_cls / steps;
    m.l_total = sum_total / steps;
    m.lr = last_lr;
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(m);
    append_metric_line(run_dir, m);
  }

  if (!run_dir.empty())
    save_model_checkpoint((fs::path(run_dir) / "checkpoints" / "final.ckpt").string(), model, "pretrain", cfg.epochs,
                          cfg.seed, &ds);
  return result;
}

TrainResult finetune(MaskedAutoencoder& model, const Dataset& ds, const TrainRunConfig& cfg, WeightCache& cache,
                     const std::string& run_dir, const StepObserver& observer) {
  cfg.validate();
  check(!ds.train_indices.empty(), "finetune: dataset has no training split");
  ensure_run_dirs(run_dir);

  const PatchConfig& mcfg = model.config();
  if (cfg.head_warm_start)
    model.warm_start_finetune_head_from_pretrain_head();
  else
    model.reinit_finetune_head(cfg.seed + 1);

  AdamW opt(model.finetune_params(), 0.9, 0.999, cfg.weight_decay);
  opt.set_lr_scales(layerwise_lr_scales(opt.params(), model.finetune_layer_count(), cfg.layerwise_lr_decay));
  Rng root(cfg.seed);
  const AugmentPolicy train_pol = train_policy(mcfg);
  const AugmentPolicy eval_pol = eval_policy(mcfg);

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.use_sam_in_finetune && epoch % cfg.weight_update_interval == 0) {
      update_masking_weights(model, ds, ds.train_indices, epoch, cache, cfg.batch_size);
      if (!run_dir.empty())
        save_model_checkpoint(checkpoint_path(run_dir, epoch), model, "finetune", epoch, cfg.seed, &ds);
    }

    std::vector<size_t> order = ds.train_indices;
    Rng shuffle_rng = root.fork(0x61000000ull + epoch);
    shuffle_rng.shuffle(order);
    Rng step_rng = root.fork(0x62000000ull + epoch);

    double sum_cls = 0.0, last_lr = 0.0;
    int steps = 0, correct = 0, seen = 0;
    const int total_steps = static_cast<int>((order.size() + cfg.batch_size - 1) / cfg.batch_size);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<size_t> ids(order.begin() + start, order.begin() + end);

      std::vector<Image> views;
      std::vector<AugmentationRecord> records;
      std::vector<int> labels;
      for (size_t id : ids) {
        const LesionSample& s = ds.samples[id];
        const AugmentationRecord rec =
            sample_augmentation(s.image, cfg.augment_train ? train_pol : eval_pol, step_rng);
        records.push_back(rec);
        views.push_back(apply_record(s.image, rec));
        labels.push_back(s.label);
      }

      std::vector<TokenPartition> parts;
      if (cfg.use_sam_in_finetune) {
        parts.reserve(ids.size());
        for (size_t k = 0; k < ids.size(); ++k) {
          const auto weights = pixel_map_to_patch_weights(cache.get(ds.samples[ids[k]].image_id), records[k], mcfg);
          parts.push_back(partition(sample_indices(weights, cfg.sample_mode, step_rng), cfg.ratios, mcfg.num_patches()));
        }
      }

      const Mat patches = patchify_normalized(ds, views, mcfg);
      const Mat logits = model.forward_classify(patches, static_cast<int>(ids.size()), parts, cfg.global_pool);
      const ClsLoss cl = cls_loss_from_logits(logits, labels);

      if (!std::isfinite(cl.value)) {
        write_nan_diagnostic(run_dir, "finetune", epoch, steps, 0.0, cl.value);
        throw Error("finetune: non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(steps));
      }

      model.params().zero_grad();
      model.backward_classify(cls_loss_grad(cl.probabilities, labels));
      const double frac = epoch + static_cast<double>(steps) / total_steps;
      last_lr = cosine_lr(cfg.base_lr, frac, cfg.warmup_epochs, cfg.epochs);
      opt.step(last_lr);

      for (size_t k = 0; k < ids.size(); ++k) {
        Eigen::Index argmax;
        logits.row(static_cast<Eigen::Index>(k)).maxCoeff(&argmax);
        correct += argmax == labels[k] ? 1 : 0;
        ++seen;
      }
      sum_cls += cl.value;
      ++steps;
      if (observer) {
        StepTrace trace;
        trace.epoch = epoch;
        trace.step = steps - 1;
        trace.sample_indices = &ids;
        trace.partitions = &parts;
        trace.patches = &patches;
        trace.labels = &labels;
        trace.l_cls = cl.value;
        trace.l_total = cl.value;
        observer(trace);
      }
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.l_con = 0.0;
    m.l_cls = sum_cls / steps;
    m.l_total = m.l_cls;
    m.lr = last_lr;
    m.train_acc = static_cast<double>(correct) / seen;
    if (cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs - 1) && !ds.val_indices.empty())
      m.val_acc = evaluate(model, ds, ds.val_indices, cfg.global_pool, HeadKind::kFinetune).top1;
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(m);
    append_metric_line(run_dir, m);
  }

  if (!run_dir.empty())
    save_model_checkpoint((fs::path(run_dir) / "checkpoints" / "final.ckpt").string(), model, "finetune", cfg.epochs,
                          cfg.seed, &ds);
  return result;
}

EvalReport evaluate(MaskedAutoencoder& model, const Dataset& ds, const std::vector<size_t>& indices, bool global_pool,
                    HeadKind head) {
  const PatchConfig& cfg = model.config();
  const AugmentPolicy eval_pol = eval_policy(cfg);
  Rng dummy(0);

  EvalReport report;
  const int k = cfg.num_classes;
  report.confusion.assign(k, std::vector<int>(k, 0));

  constexpr size_t kEvalBatch = 64;
  for (size_t start = 0; start < indices.size(); start += kEvalBatch) {
    const size_t end = std::min(indices.size(), start + kEvalBatch);
    std::vector<Image> views;
    std::vector<int> labels;
    for (size_t i = start; i < end; ++i) {
      const LesionSample& s = ds.samples[indices[i]];
      views.push_back(apply_record(s.image, sample_augmentation(s.image, eval_pol, dummy)));
      labels.push_back(s.label);
    }
    const Mat patches = patchify_normalized(ds, views, cfg);
    Mat logits;
    if (head == HeadKind::kFinetune) {
      logits = model.forward_classify(patches, static_cast<int>(views.size()), {}, global_pool);
    } else {
      const EncoderOutput enc = model.forward_all_tokens(patches, static_cast<int>(views.size()));
      logits = model.classify_logits(enc.cls_rows());
    }
    for (size_t i = 0; i < views.size(); ++i) {
      Eigen::Index argmax;
      logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&argmax);
      report.confusion[labels[i]][argmax] += 1;
    }
  }

  report.count = static_cast<int>(indices.size());
  int correct = 0;
  double per_class_sum = 0.0;
  int classes_seen = 0;
  for (int c = 0; c < k; ++c) {
    int row_total = 0;
    for (int d = 0; d < k; ++d) row_total += report.confusion[c][d];
    correct += report.confusion[c][c];
    if (row_total > 0) {
      report.per_class_acc.push_back(static_cast<double>(report.confusion[c][c]) / row_total);
      per_class_sum += report.per_class_acc.back();
      ++classes_seen;
    } else {
      report.per_class_acc.push_back(0.0);
    }
  }
  report.top1 = report.count > 0 ? static_cast<double>(correct) / report.count : 0.0;
  report.mean_per_class_acc = classes_seen > 0 ? per_class_sum / classes_seen : 0.0;
  return report;
}

}  // namespace samlab
