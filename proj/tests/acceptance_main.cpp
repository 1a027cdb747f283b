// Acceptance suite: one criterion per invocation (or "all"), one PASS/FAIL
// line each, nonzero exit if anything fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "samlab/cli/commands.hpp"
#include "samlab/cli/config.hpp"
#include "samlab/data/dataset.hpp"
#include "samlab/metrics/flops.hpp"
#include "samlab/metrics/precision.hpp"
#include "samlab/model/checkpoint.hpp"
#include "samlab/model/vit.hpp"
#include "samlab/train/trainer.hpp"
#include "reference_mae.hpp"

namespace fs = std::filesystem;
using namespace samlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// C1: FLOPs reduction, anchored to the published ViT-B table numbers.
Outcome criterion_1() {
  const PatchConfig cfg = vit_base_patch16_224();
  const int full_tokens = cfg.num_patches() + 1;
  const int sam_tokens = sam_token_count(cfg, {0.45, 0.30});

  const FlopsReport full = count_flops(cfg, full_tokens);
  const FlopsReport sam = count_flops(cfg, sam_tokens);
  const double full_g = full.total() / 1e9;
  const double sam_g = sam.total() / 1e9;
  const double reduction = 100.0 * (1.0 - static_cast<double>(sam.total()) / full.total());

  // convention-free ratio: identical under 1-op and 2-op MAC counting
  const double ratio1 = static_cast<double>(count_flops(cfg, sam_tokens, 1).total()) /
                        count_flops(cfg, full_tokens, 1).total();
  const double ratio2 = static_cast<double>(count_flops(cfg, sam_tokens, 2).total()) /
                        count_flops(cfg, full_tokens, 2).total();

  const bool pass = sam_tokens == 50 && std::abs(full_g - 16.86) / 16.86 < 0.06 &&
                    std::abs(sam_g - 4.37) / 4.37 < 0.06 && std::abs(reduction - 74.08) <= 1.5 &&
                    std::abs(ratio1 - ratio2) < 1e-12;
  std::ostringstream ss;
  ss << "full=" << full_g << "G sam=" << sam_g << "G reduction=" << reduction << "% (tokens " << full_tokens << "->"
     << sam_tokens << ")";
  return {pass, ss.str()};
}

// ---------------------------------------------------------------------------
// C2: partition correctness over 10,000 random draws + brute-force oracle.
Outcome criterion_2() {
  Rng rng(20240001);
  for (int iter = 0; iter < 10000; ++iter) {
    const int n = 1 + rng.uniform_int(256);
    const double r = rng.uniform();
    const double t = rng.uniform() * (1.0 - r);

    std::vector<double> w(n);
    for (double& v : w) v = rng.uniform();
    Rng unused(0);
    const TokenPartition part = partition(sample_indices(w, SampleMode::kDeterministic, unused), {r, t}, n);

    // exact disjoint cover with the floor cardinalities
    const auto counts = partition_counts(n, {r, t});
    if (static_cast<int>(part.mask.size()) != counts.masked ||
        static_cast<int>(part.throw_away.size()) != counts.thrown ||
        static_cast<int>(part.vis.size()) != counts.visible)
      return {false, "cardinality mismatch at iter " + std::to_string(iter)};
    std::vector<int> seen(n, 0);
    for (int idx : part.mask) ++seen[idx];
    for (int idx : part.throw_away) ++seen[idx];
    for (int idx : part.vis) ++seen[idx];
    for (int i = 0; i < n; ++i)
      if (seen[i] != 1) return {false, "not a disjoint cover at iter " + std::to_string(iter)};

    // sort-and-slice brute force
    std::vector<int> oracle(n);
    std::iota(oracle.begin(), oracle.end(), 0);
    std::stable_sort(oracle.begin(), oracle.end(), [&](int a, int b) { return w[a] > w[b]; });
    const int nm = static_cast<int>(std::floor(n * r));
    const int nmt = static_cast<int>(std::floor(n * (r + t)));
    if (part.mask != std::vector<int>(oracle.begin(), oracle.begin() + nm) ||
        part.throw_away != std::vector<int>(oracle.begin() + nm, oracle.begin() + nmt) ||
        part.vis != std::vector<int>(oracle.begin() + nmt, oracle.end()))
      return {false, "brute-force oracle mismatch at iter " + std::to_string(iter)};
  }
  return {true, "10000 draws: exact covers, floor cardinalities, oracle match"};
}

// ---------------------------------------------------------------------------
// C3: stochastic sampling distribution.
Outcome criterion_3() {
  const std::vector<double> peaked{0.99, 0.01, 0.01, 0.01, 0.01};
  int first = 0;
  for (int s = 0; s < 1000; ++s) {
    Rng rng(5000 + s);
    first += sample_indices(peaked, SampleMode::kStochastic, rng).order[0] == 0 ? 1 : 0;
  }

  const int n = 5;
  std::vector<int> counts(n, 0);
  for (int s = 0; s < 1000; ++s) {
    Rng rng(90000 + s);
    ++counts[sample_indices(std::vector<double>(n, 1.0), SampleMode::kStochastic, rng).order[0]];
  }
  const double p = 1.0 / n;
  const double bound = 3.0 * std::sqrt(p * (1 - p) / 1000.0);
  bool uniform_ok = true;
  for (int c : counts) uniform_ok &= std::abs(c / 1000.0 - p) <= bound + 1e-12;

  std::ostringstream ss;
  ss << "peaked first-place rate " << first / 1000.0 << " (need >= 0.90); all-equal within 3-sigma: "
     << (uniform_ok ? "yes" : "no");
  return {first >= 900 && uniform_ok, ss.str()};
}

// ---------------------------------------------------------------------------
// C4: gradients of the total loss vs central finite differences, every param.
Outcome criterion_4() {
  PatchConfig cfg;
  cfg.image_h = cfg.image_w = 16;
  cfg.patch_size = 8;  // N = 4
  cfg.embed_dim = 8;
  cfg.num_heads = 2;
  cfg.encoder_depth = 1;
  cfg.decoder_dim = 8;
  cfg.decoder_depth = 1;
  cfg.decoder_heads = 2;
  cfg.num_classes = 2;
  MaskedAutoencoder model(cfg, 77);

  Rng rng(13);
  Mat patches(2 * 4, cfg.patch_dim());
  for (Eigen::Index i = 0; i < patches.rows(); ++i)
    for (Eigen::Index j = 0; j < patches.cols(); ++j) patches(i, j) = rng.normal() * 0.5;
  std::vector<TokenPartition> parts;
  Rng prng(3);
  for (int b = 0; b < 2; ++b) parts.push_back(random_partition(4, {0.5, 0.25}, prng));
  const std::vector<int> labels{0, 1};
  LossConfig loss;
  loss.lambda_cls = 0.1;

  model.params().zero_grad();
  model.forward_pretrain(patches, 2, parts, labels, loss);
  model.backward_pretrain();

  const double step = 1e-4;
  double worst = 0.0;
  std::string worst_name;
  long checked = 0;
  for (Param* p : model.pretrain_params()) {
    for (Eigen::Index k = 0; k < p->value.size(); ++k) {
      double* v = p->value.data() + k;
      const double saved = *v;
      *v = saved + step;
      const double up = model.forward_pretrain(patches, 2, parts, labels, loss).l_total;
      *v = saved - step;
      const double down = model.forward_pretrain(patches, 2, parts, labels, loss).l_total;
      *v = saved;
      const double numeric = (up - down) / (2 * step);
      const double analytic = *(p->grad.data() + k);
      const double err = std::abs(numeric - analytic) / std::max(1e-6, std::abs(numeric) + std::abs(analytic));
      ++checked;
      if (err > worst) {
        worst = err;
        worst_name = p->name;
      }
    }
  }
  std::ostringstream ss;
  ss << checked << " parameters checked, max rel err " << worst << " (" << worst_name << ")";
  return {worst < 1e-3, ss.str()};
}

// ---------------------------------------------------------------------------
// C5: with lambda=0 and random masking at r=0.75, the pipeline equals an
// independently coded plain-MAE step / 50-epoch run on the same schedule.
Outcome criterion_5() {
  Dataset ds = generate_synthetic_lesion_dataset(64, 4, 32, 7);
  ds.split(1.0, 7);

  PatchConfig cfg;
  cfg.image_h = cfg.image_w = 32;
  cfg.patch_size = 8;  // N = 16
  cfg.embed_dim = 16;
  cfg.num_heads = 2;
  cfg.encoder_depth = 2;
  cfg.decoder_dim = 8;
  cfg.decoder_depth = 1;
  cfg.decoder_heads = 2;
  cfg.num_classes = 4;
  MaskedAutoencoder model(cfg, 55);

  refmae::Config rcfg;
  rcfg.image = 32;
  rcfg.patch = 8;
  rcfg.dim = 16;
  rcfg.heads = 2;
  rcfg.depth = 2;
  rcfg.dec_dim = 8;
  rcfg.dec_heads = 2;
  rcfg.dec_depth = 1;
  refmae::Model ref(rcfg);

  // identical initialization, injected by hierarchical name
  auto named = ref.named();
  for (const Param* p : model.params().all()) {
    auto it = named.find(p->name);
    if (it == named.end()) continue;  // classification heads: unused at lambda=0
    refmae::Tensor* t = it->second;
    if (t->val.rows() == p->value.rows() && t->val.cols() == p->value.cols()) {
      for (Eigen::Index r = 0; r < p->value.rows(); ++r)
        for (Eigen::Index c = 0; c < p->value.cols(); ++c) t->val(r, c) = p->value(r, c);
    } else if (t->val.rows() == p->value.cols() && t->val.cols() == p->value.rows()) {
      for (Eigen::Index r = 0; r < p->value.rows(); ++r)
        for (Eigen::Index c = 0; c < p->value.cols(); ++c) t->val(c, r) = p->value(r, c);
    } else {
      return {false, "parameter shape mismatch for " + p->name};
    }
  }

  TrainRunConfig tc;
  tc.epochs = 50;
  tc.warmup_epochs = 5;
  tc.batch_size = 16;
  tc.base_lr = 1e-3;
  tc.weight_decay = 0.05;
  tc.ratios = {0.75, 0.0};
  tc.seed = 3;
  tc.loss.lambda_cls = 0.0;
  tc.augment_train = false;  // schedule replay uses the canonical images

  struct Step {
    std::vector<size_t> ids;
    std::vector<TokenPartition> parts;
    double l_con;
  };
  std::vector<Step> schedule;
  WeightCache cache;
  const TrainResult ours = pretrain(model, ds, tc, Strategy::kRandom, cache, "", [&](const StepTrace& t) {
    schedule.push_back({*t.sample_indices, *t.partitions, t.l_con});
  });

  // replay the recorded schedule through the reference implementation
  const int steps_per_epoch = static_cast<int>(schedule.size()) / tc.epochs;
  std::vector<double> ref_losses;
  int step_idx = 0;
  for (const Step& step : schedule) {
    std::vector<refmae::Model::Sample> batch;
    for (size_t k = 0; k < step.ids.size(); ++k) {
      refmae::Model::Sample s;
      const Image& img = ds.samples[step.ids[k]].image;
      s.pixels.resize(img.data.size());
      for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
          for (int c = 0; c < 3; ++c)
            s.pixels[(static_cast<size_t>(y) * img.w + x) * 3 + c] =
                (img.at(y, x, c) - ds.channel_mean[c]) / ds.channel_std[c];
      s.mask = step.parts[k].mask;
      s.vis = step.parts[k].vis;
      batch.push_back(std::move(s));
    }
    const int epoch = step_idx / steps_per_epoch;
    const int in_epoch = step_idx % steps_per_epoch;
    const double frac = epoch + static_cast<double>(in_epoch) / steps_per_epoch;
    double lr;
    if (frac < tc.warmup_epochs) {
      lr = tc.base_lr * frac / tc.warmup_epochs;
    } else {
      lr = tc.base_lr * 0.5 *
           (1.0 + std::cos(M_PI * (frac - tc.warmup_epochs) / (tc.epochs - tc.warmup_epochs)));
    }
    ref_losses.push_back(ref.train_step(batch, lr));
    ++step_idx;
  }

  const double first_gap = std::abs(schedule[0].l_con - ref_losses[0]);

  // per-epoch curves
  double max_epoch_gap = 0.0;
  for (int e = 0; e < tc.epochs; ++e) {
    double a = 0.0, b = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      a += schedule[e * steps_per_epoch + s].l_con;
      b += ref_losses[e * steps_per_epoch + s];
    }
    max_epoch_gap = std::max(max_epoch_gap, std::abs(a - b) / steps_per_epoch);
  }
  const double final_loss = ours.log.back().l_con;

  std::ostringstream ss;
  ss << "first-step gap " << first_gap << " (need < 1e-6); max per-epoch gap over 50 epochs " << max_epoch_gap
     << "; final l_con " << final_loss;
  return {first_gap < 1e-6 && max_epoch_gap < 0.02 * final_loss, ss.str()};
}

// ---------------------------------------------------------------------------
// C6: SAM masking precision on the synthetic lesion corpus, against random
// and attention-only (lambda=0) baselines trained the same way.
struct PrecisionOutcome {
  double lesion_rate = 0.0;
  double argmax_hit = 0.0;
};

PrecisionOutcome measure_precision(MaskedAutoencoder& model, const Dataset& ds, const std::vector<size_t>& val,
                                   SampleMode mode, uint64_t seed) {
  const PatchConfig& cfg = model.config();
  WeightCache cache;
  update_masking_weights(model, ds, val, 0, cache);
  AugmentationRecord identity;
  identity.x = identity.y = 0;
  identity.w = identity.h = cfg.image_w;
  identity.out_h = identity.out_w = cfg.image_h;

  Rng rng(seed);
  std::vector<TokenPartition> parts;
  std::vector<std::vector<double>> weights;
  std::vector<const Image*> masks;
  for (size_t idx : val) {
    const auto& s = ds.samples[idx];
    const auto w = pixel_map_to_patch_weights(cache.get(s.image_id), identity, cfg);
    parts.push_back(partition(sample_indices(w, mode, rng), {0.45, 0.30}, cfg.num_patches()));
    weights.push_back(w);
    masks.push_back(&s.lesion_mask);
  }
  const auto rep = mask_precision(parts, weights, masks, cfg);
  return {rep.lesion_mask_rate, rep.argmax_hit_rate};
}

Outcome criterion_6() {
  // Reference constants from the source table, not reproducible at desk
  // scale: Messidor-2 63.41, BTMD 98.39, HAM10000 81.97 (top-1).
  Dataset ds = generate_synthetic_lesion_dataset(512, 4, 64, 42);
  ds.split(0.8, 42);

  const PatchConfig cfg = synth_tiny();
  TrainRunConfig tc;
  tc.epochs = 160;  // >= 150
  tc.warmup_epochs = 40;
  tc.weight_update_interval = 20;
  tc.batch_size = 64;
  tc.base_lr = 1e-3;
  tc.seed = 1;
  tc.loss.lambda_cls = 1.0;

  const auto t0 = std::chrono::steady_clock::now();
  MaskedAutoencoder sam_model(cfg, 1);
  WeightCache sam_cache;
  pretrain(sam_model, ds, tc, Strategy::kSam, sam_cache);
  const PrecisionOutcome sam = measure_precision(sam_model, ds, ds.val_indices, SampleMode::kStochastic, 9);

  // attention-only baseline: identical pipeline, no classification loss
  TrainRunConfig amt_tc = tc;
  amt_tc.loss.lambda_cls = 0.0;
  MaskedAutoencoder amt_model(cfg, 1);
  WeightCache amt_cache;
  pretrain(amt_model, ds, amt_tc, Strategy::kAmt, amt_cache);
  const PrecisionOutcome amt = measure_precision(amt_model, ds, ds.val_indices, SampleMode::kStochastic, 9);

  // random baseline needs no training
  Rng rng(17);
  std::vector<TokenPartition> parts;
  std::vector<const Image*> masks;
  for (size_t idx : ds.val_indices) {
    parts.push_back(random_partition(cfg.num_patches(), {0.45, 0.30}, rng));
    masks.push_back(&ds.samples[idx].lesion_mask);
  }
  const double random_rate = mask_precision(parts, {}, masks, cfg).lesion_mask_rate;
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

  const bool pass = sam.lesion_rate >= 1.5 * random_rate && sam.argmax_hit >= 0.70 &&
                    sam.lesion_rate > amt.lesion_rate && minutes <= 45.0;
  std::ostringstream ss;
  ss << "lesion_mask_rate sam=" << sam.lesion_rate << " random=" << random_rate << " amt=" << amt.lesion_rate
     << "; argmax_hit=" << sam.argmax_hit << "; " << minutes
     << " min (reference-only real-data top-1: 63.41/98.39/81.97)";
  return {pass, ss.str()};
}

// ---------------------------------------------------------------------------
// C7: pre-train/fine-tune consistency of the encoder token count; the test
// path always runs N+1 tokens.
Outcome criterion_7() {
  Rng rng(404);
  for (int iter = 0; iter < 2000; ++iter) {
    const int n = 1 + rng.uniform_int(256);
    const double r = rng.uniform();
    const double t = rng.uniform() * (1.0 - r);
    const auto pre = partition_counts(n, {r, t});
    const auto ft = partition_counts(n, {r, t});
    if (pre.visible != ft.visible) return {false, "count mismatch"};
  }

  // live check: drive both loops and the evaluation path
  Dataset ds = generate_synthetic_lesion_dataset(16, 4, 32, 5);
  ds.split(1.0, 5);
  PatchConfig cfg;
  cfg.image_h = cfg.image_w = 32;
  cfg.patch_size = 8;
  cfg.embed_dim = 16;
  cfg.num_heads = 2;
  cfg.encoder_depth = 1;
  cfg.decoder_dim = 8;
  cfg.decoder_depth = 1;
  cfg.decoder_heads = 2;
  cfg.num_classes = 4;

  for (const MaskingRatios ratios : {MaskingRatios{0.45, 0.30}, MaskingRatios{0.75, 0.0}, MaskingRatios{0.2, 0.5}}) {
    const int expected = partition_counts(16, ratios).visible;
    TrainRunConfig tc;
    tc.epochs = 1;
    tc.warmup_epochs = 0;
    tc.batch_size = 8;
    tc.weight_update_interval = 1;
    tc.ratios = ratios;
    tc.seed = 2;
    tc.eval_every = 0;

    std::vector<int> seen;
    MaskedAutoencoder m1(cfg, 3);
    WeightCache c1;
    pretrain(m1, ds, tc, Strategy::kSam, c1, "", [&](const StepTrace& t) {
      for (const auto& p : *t.partitions) seen.push_back(static_cast<int>(p.vis.size()));
    });
    MaskedAutoencoder m2(cfg, 3);
    WeightCache c2;
    finetune(m2, ds, tc, c2, "", [&](const StepTrace& t) {
      for (const auto& p : *t.partitions) seen.push_back(static_cast<int>(p.vis.size()));
    });
    for (int v : seen)
      if (v != expected) return {false, "live visible-count mismatch"};

    Mat patches = Mat::Zero(16, cfg.patch_dim());
    const EncoderOutput enc = m2.forward_all_tokens(patches, 1);
    if (enc.seq != 17) return {false, "test path did not process N+1 tokens"};
  }
  return {true, "visible counts identical across phases for all (N, r, t); test path runs N+1 tokens"};
}

// ---------------------------------------------------------------------------
// C8: single-batch overfit smoke tests.
Outcome criterion_8() {
  Dataset ds = generate_synthetic_lesion_dataset(8, 4, 32, 21);
  ds.split(1.0, 21);
  PatchConfig cfg;
  cfg.image_h = cfg.image_w = 32;
  cfg.patch_size = 8;
  cfg.embed_dim = 32;
  cfg.num_heads = 4;
  cfg.encoder_depth = 2;
  cfg.decoder_dim = 16;
  cfg.decoder_depth = 1;
  cfg.decoder_heads = 4;
  cfg.num_classes = 4;

  // pre-training: 200 steps (one batch per epoch) must push L_cls below 0.05.
  // Light masking keeps the class evidence in view most steps, so the model
  // has to memorize the batch rather than fight blind views.
  TrainRunConfig tc;
  tc.epochs = 200;
  tc.warmup_epochs = 10;
  tc.batch_size = 8;
  tc.weight_update_interval = 50;
  tc.base_lr = 3e-3;
  tc.seed = 4;
  tc.loss.lambda_cls = 1.0;
  tc.ratios = {0.25, 0.0};
  tc.augment_train = false;

  MaskedAutoencoder model(cfg, 9);
  WeightCache cache;
  double best_cls = 1e9;
  int steps_to_target = -1;
  int step_count = 0;
  pretrain(model, ds, tc, Strategy::kRandom, cache, "", [&](const StepTrace& t) {
    ++step_count;
    best_cls = std::min(best_cls, t.l_cls);
    if (steps_to_target < 0 && t.l_cls < 0.05) steps_to_target = step_count;
  });

  // fine-tuning: 16 images to 100% train accuracy within 300 steps
  Dataset ds16 = generate_synthetic_lesion_dataset(16, 4, 32, 22);
  ds16.split(1.0, 22);
  TrainRunConfig ft;
  ft.epochs = 300;
  ft.warmup_epochs = 10;
  ft.batch_size = 16;
  ft.weight_update_interval = 50;
  ft.base_lr = 1e-3;
  ft.seed = 5;
  ft.augment_train = false;
  ft.eval_every = 0;

  MaskedAutoencoder ft_model(cfg, 11);
  WeightCache ft_cache;
  const TrainResult ft_result = finetune(ft_model, ds16, ft, ft_cache);
  int epochs_to_full = -1;
  for (const auto& m : ft_result.log)
    if (m.train_acc && *m.train_acc == 1.0) {
      epochs_to_full = m.epoch + 1;
      break;
    }

  std::ostringstream ss;
  ss << "pretrain l_cls<0.05 after " << steps_to_target << " steps (best " << best_cls
     << "); finetune 100% train acc after " << epochs_to_full << " steps";
  return {steps_to_target > 0 && steps_to_target <= 200 && epochs_to_full > 0 && epochs_to_full <= 300, ss.str()};
}

// ---------------------------------------------------------------------------
// C9: determinism of metric logs, checkpoint round trip, cache idempotence.
Outcome criterion_9() {
  Dataset ds = generate_synthetic_lesion_dataset(24, 4, 32, 31);
  ds.split(0.75, 31);
  PatchConfig cfg;
  cfg.image_h = cfg.image_w = 32;
  cfg.patch_size = 8;
  cfg.embed_dim = 16;
  cfg.num_heads = 2;
  cfg.encoder_depth = 1;
  cfg.decoder_dim = 8;
  cfg.decoder_depth = 1;
  cfg.decoder_heads = 2;
  cfg.num_classes = 4;

  TrainRunConfig tc;
  tc.epochs = 3;
  tc.warmup_epochs = 1;
  tc.batch_size = 8;
  tc.weight_update_interval = 1;
  tc.seed = 77;

  const fs::path dir_a = fs::temp_directory_path() / "samlab_acc9_a";
  const fs::path dir_b = fs::temp_directory_path() / "samlab_acc9_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  MaskedAutoencoder m1(cfg, 9);
  WeightCache c1;
  pretrain(m1, ds, tc, Strategy::kSam, c1, dir_a.string());
  MaskedAutoencoder m2(cfg, 9);
  WeightCache c2;
  pretrain(m2, ds, tc, Strategy::kSam, c2, dir_b.string());

  // metric logs bit-identical apart from wall time
  auto normalized_lines = [](const fs::path& p) {
    std::vector<std::string> lines;
    std::ifstream in(p / "metrics.jsonl");
    for (std::string line; std::getline(in, line);) {
      auto j = nlohmann::json::parse(line);
      j.erase("wall_time_s");
      lines.push_back(j.dump());
    }
    return lines;
  };
  const bool logs_equal = normalized_lines(dir_a) == normalized_lines(dir_b) && !normalized_lines(dir_a).empty();

  // checkpoint round trip reproduces outputs exactly
  Mat probe = Mat::Zero(16, cfg.patch_dim());
  Rng rng(2);
  for (Eigen::Index i = 0; i < probe.size(); ++i) *(probe.data() + i) = rng.normal();
  const Mat before = m1.forward_all_tokens(probe, 1).encodings;
  MaskedAutoencoder loaded(cfg, 12345);
  load_checkpoint((dir_a / "checkpoints" / "final.ckpt").string(), loaded.params());
  const Mat after = loaded.forward_all_tokens(probe, 1).encodings;
  const bool checkpoint_exact = before == after;

  // cache refreshes are idempotent under frozen parameters
  WeightCache cache;
  update_masking_weights(m1, ds, ds.train_indices, 0, cache);
  std::vector<std::vector<float>> maps;
  for (size_t idx : ds.train_indices) maps.push_back(cache.get(ds.samples[idx].image_id).pixel_map.data);
  update_masking_weights(m1, ds, ds.train_indices, 1, cache);
  bool idempotent = true;
  for (size_t k = 0; k < ds.train_indices.size(); ++k)
    idempotent &= cache.get(ds.samples[ds.train_indices[k]].image_id).pixel_map.data == maps[k];

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  std::ostringstream ss;
  ss << "logs identical: " << (logs_equal ? "yes" : "no") << "; checkpoint outputs exact: "
     << (checkpoint_exact ? "yes" : "no") << "; cache idempotent: " << (idempotent ? "yes" : "no");
  return {logs_equal && checkpoint_exact && idempotent, ss.str()};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "FLOPs reduction vs published ViT-B table", criterion_1},
    {2, "partition correctness (10k property draws + brute-force oracle)", criterion_2},
    {3, "stochastic sampling distribution", criterion_3},
    {4, "gradient integrity vs central finite differences", criterion_4},
    {5, "plain-MAE equivalence at lambda=0, r=0.75, t=0", criterion_5},
    {6, "SAM masking precision on the synthetic lesion set", criterion_6},
    {7, "pre-train/fine-tune token-count consistency", criterion_7},
    {8, "single-batch overfit smoke tests", criterion_8},
    {9, "determinism and persistence", criterion_9},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  if (argc > 1 && std::string(argv[1]) != "all") {
    selected.push_back(std::atoi(argv[1]));
  } else {
    for (const auto& c : kCriteria) selected.push_back(c.id);
  }

  bool all_pass = true;
  for (int id : selected) {
    const Criterion* criterion = nullptr;
    for (const auto& c : kCriteria)
      if (c.id == id) criterion = &c;
    if (!criterion) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome outcome;
    try {
      outcome = criterion->run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    all_pass &= outcome.pass;
    std::cout << (outcome.pass ? "[PASS]" : "[FAIL]") << " C" << criterion->id << " " << criterion->name << ": "
              << outcome.detail << "\n";
  }
  return all_pass ? 0 : 1;
}
