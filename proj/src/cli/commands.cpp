#include "samlab/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "samlab/metrics/flops.hpp"
#include "samlab/metrics/overlays.hpp"
#include "samlab/model/checkpoint.hpp"

namespace fs = std::filesystem;

namespace samlab::cli {

std::string resolve_run_dir(const std::string& explicit_dir, const std::string& command) {
  if (!explicit_dir.empty()) return explicit_dir;
  const char* root_env = std::getenv("SAMLAB_RUN_ROOT");
  const fs::path root = root_env ? fs::path(root_env) : fs::path("runs");
  const auto stamp =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
          .count();
  return (root / (command + "-" + std::to_string(stamp))).string();
}

namespace {

void write_snapshot(const std::string& run_dir, const ConfigMap& cfg, const std::string& phase) {
  ConfigMap snapshot = cfg;
  snapshot["phase"] = phase;
  fs::create_directories(run_dir);
  std::ofstream out(fs::path(run_dir) / "config.cfg");
  out << dump_config(snapshot);
  check(out.good(), "run dir: cannot write config snapshot");
}

ConfigMap read_snapshot(const std::string& run_dir) {
  return load_config_file((fs::path(run_dir) / "config.cfg").string());
}

std::string final_checkpoint(const std::string& run_dir) {
  const auto path = fs::path(run_dir) / "checkpoints" / "final.ckpt";
  check(fs::exists(path), "run dir: missing checkpoint " + path.string());
  return path.string();
}

}  // namespace

int cmd_pretrain(const ConfigMap& cfg, const std::string& run_dir_arg) {
  RunSpec spec = build_run_spec(cfg, Phase::kPretrain);
  Dataset ds = load_dataset_from_uri(spec.dataset_uri, spec.train.seed, spec.split_fraction);
  spec.model.num_classes = ds.num_classes;

  const std::string run_dir = resolve_run_dir(run_dir_arg, "pretrain");
  write_snapshot(run_dir, cfg, "pretrain");
  std::cout << "run dir: " << run_dir << "\n";
  std::cout << "dataset: " << spec.dataset_uri << " (" << ds.size() << " images, " << ds.num_classes << " classes, "
            << ds.train_indices.size() << " train / " << ds.val_indices.size() << " val)\n";

  MaskedAutoencoder model(spec.model, spec.train.seed);
  WeightCache cache;
  const TrainResult result = pretrain(model, ds, spec.train, spec.strategy, cache, run_dir);
  std::cout << "pretrain finished: l_con " << result.log.back().l_con << ", l_cls " << result.log.back().l_cls
            << " after " << result.log.size() << " epochs\n";
  return 0;
}

int cmd_finetune(const ConfigMap& cfg, const std::string& checkpoint, const std::string& run_dir_arg) {
  RunSpec spec = build_run_spec(cfg, Phase::kFinetune);
  Dataset ds = load_dataset_from_uri(spec.dataset_uri, spec.train.seed, spec.split_fraction);
  spec.model.num_classes = ds.num_classes;

  MaskedAutoencoder model(spec.model, spec.train.seed);
  if (!checkpoint.empty()) {
    const auto meta = load_checkpoint(checkpoint, model.params());
    std::cout << "warm start from " << checkpoint << " (phase " << meta.value("phase", "?") << ", epoch "
              << meta.value("epoch", -1) << ")\n";
  } else {
    std::cout << "no checkpoint given: fine-tuning from random initialization\n";
  }

  ConfigMap snapshot = cfg;
  if (!checkpoint.empty()) snapshot["checkpoint"] = checkpoint;
  const std::string run_dir = resolve_run_dir(run_dir_arg, "finetune");
  write_snapshot(run_dir, snapshot, "finetune");
  std::cout << "run dir: " << run_dir << "\n";

  WeightCache cache;
  const TrainResult result = finetune(model, ds, spec.train, cache, run_dir);
  std::cout << "finetune finished: train acc " << result.log.back().train_acc.value_or(0.0);
  if (result.log.back().val_acc) std::cout << ", val acc " << *result.log.back().val_acc;
  std::cout << "\n";
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& split) {
  const ConfigMap snapshot = read_snapshot(run_dir);
  const std::string phase = snapshot.count("phase") ? snapshot.at("phase") : "finetune";
  RunSpec spec = build_run_spec(snapshot, phase == "pretrain" ? Phase::kPretrain : Phase::kFinetune);
  Dataset ds = load_dataset_from_uri(spec.dataset_uri, spec.train.seed, spec.split_fraction);
  spec.model.num_classes = ds.num_classes;

  MaskedAutoencoder model(spec.model, spec.train.seed);
  load_checkpoint(final_checkpoint(run_dir), model.params());

  const auto& indices = split == "train" ? ds.train_indices : ds.val_indices;
  check(!indices.empty(), "eval: requested split is empty");
  const HeadKind head = phase == "pretrain" ? HeadKind::kPretrainCls : HeadKind::kFinetune;
  const EvalReport report = evaluate(model, ds, indices, spec.train.global_pool, head);

  fs::create_directories(fs::path(run_dir) / "reports");
  std::ofstream out(fs::path(run_dir) / "reports" / ("eval_" + split + ".json"));
  out << report.to_json().dump(2) << "\n";
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

int cmd_maskdump(const std::string& run_dir, int n_images, const std::string& out_dir) {
  const ConfigMap snapshot = read_snapshot(run_dir);
  const std::string phase = snapshot.count("phase") ? snapshot.at("phase") : "pretrain";
  RunSpec spec = build_run_spec(snapshot, phase == "finetune" ? Phase::kFinetune : Phase::kPretrain);
  Dataset ds = load_dataset_from_uri(spec.dataset_uri, spec.train.seed, spec.split_fraction);
  spec.model.num_classes = ds.num_classes;

  MaskedAutoencoder model(spec.model, spec.train.seed);
  const auto meta = load_checkpoint(final_checkpoint(run_dir), model.params());
  const int epoch = meta.value("epoch", -1);

  const std::vector<size_t>& pool = ds.val_indices.empty() ? ds.train_indices : ds.val_indices;
  const int n = std::min<int>(n_images, static_cast<int>(pool.size()));

  const fs::path dump_dir = out_dir.empty() ? fs::path(run_dir) / "maskdump" : fs::path(out_dir);
  fs::create_directories(dump_dir);

  WeightCache cache;
  std::vector<size_t> indices(pool.begin(), pool.begin() + n);
  update_masking_weights(model, ds, indices, epoch, cache);

  Rng rng(spec.train.seed);
  const AugmentPolicy eval_pol{AugmentPolicy::Kind::kEval, spec.model.image_h};
  for (size_t idx : indices) {
    const LesionSample& s = ds.samples[idx];
    const MaskingWeights& weights = cache.get(s.image_id);
    const AugmentationRecord rec = sample_augmentation(s.image, eval_pol, rng);
    const auto patch_weights = pixel_map_to_patch_weights(weights, rec, spec.model);
    const TokenPartition part =
        partition(sample_indices(patch_weights, spec.train.sample_mode, rng), spec.train.ratios,
                  spec.model.num_patches());

    std::string flat_id = s.image_id;  // folder ids contain path separators
    std::replace(flat_id.begin(), flat_id.end(), '/', '_');
    const std::string stem = (dump_dir / flat_id).string();
    write_png_gray16(stem + "_weights.png", weights.pixel_map);
    export_partition_overlay(apply_record(s.image, rec), part, spec.model, stem + "_partition.png");

    nlohmann::json record{{"image_id", s.image_id},          {"epoch", weights.source_epoch},
                          {"mask", part.mask},               {"throw", part.throw_away},
                          {"vis", part.vis},                 {"weights_png", flat_id + "_weights.png"},
                          {"partition_png", flat_id + "_partition.png"}};
    std::ofstream rec_out(stem + "_record.json");
    rec_out << record.dump(2) << "\n";
  }
  std::cout << "wrote " << 2 * n << " PNG files to " << dump_dir.string() << "\n";
  return 0;
}

int cmd_flops(const ConfigMap& cfg, const std::string& csv_path) {
  ConfigMap with_default = cfg;
  if (!with_default.count("model")) with_default["model"] = "vit-b";
  RunSpec spec = build_run_spec(with_default, Phase::kFinetune);

  const int full_tokens = spec.model.num_patches() + 1;
  const int sam_tokens = sam_token_count(spec.model, spec.train.ratios);
  const FlopsReport full = count_flops(spec.model, full_tokens);
  const FlopsReport sam = count_flops(spec.model, sam_tokens);
  const double reduction = 100.0 * (1.0 - static_cast<double>(sam.total()) / static_cast<double>(full.total()));

  nlohmann::json out{{"full", full.to_json()},
                     {"sam", sam.to_json()},
                     {"reduction_percent", reduction},
                     {"mask_ratio", spec.train.ratios.mask_ratio},
                     {"throw_ratio", spec.train.ratios.throw_ratio}};
  std::cout << out.dump(2) << "\n";

  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    check(csv.good(), "flops: cannot write csv " + csv_path);
    csv << "mask_ratio,throw_ratio,tokens,flops,reduction_percent\n";
    for (int ri = 0; ri <= 19; ++ri) {
      for (int ti = 0; ti + ri <= 19; ++ti) {
        MaskingRatios ratios{ri * 0.05, ti * 0.05};
        const int tokens = sam_token_count(spec.model, ratios);
        const FlopsReport rep = count_flops(spec.model, tokens);
        const double red = 100.0 * (1.0 - static_cast<double>(rep.total()) / static_cast<double>(full.total()));
        csv << ratios.mask_ratio << "," << ratios.throw_ratio << "," << tokens << "," << rep.total() << "," << red
            << "\n";
      }
    }
    std::cout << "wrote sweep to " << csv_path << "\n";
  }
  return 0;
}

}  // namespace samlab::cli
