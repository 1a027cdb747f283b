#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "samlab/data/dataset.hpp"
#include "samlab/masking/weights.hpp"
#include "samlab/model/vit.hpp"
#include "samlab/train/losses.hpp"
#include "samlab/train/optimizer.hpp"

namespace samlab {

enum class Strategy { kRandom, kAmt, kSam };
Strategy strategy_from_string(const std::string& s);
std::string strategy_to_string(Strategy s);

struct TrainRunConfig {
  int epochs = 300;
  int warmup_epochs = 40;
  double base_lr = 1e-3;
  double weight_decay = 0.05;
  int batch_size = 64;
  MaskingRatios ratios{0.45, 0.30};
  int weight_update_interval = 40;
  double layerwise_lr_decay = 0.75;  // fine-tuning only
  bool global_pool = true;           // fine-tuning feature
  uint64_t seed = 0;
  LossConfig loss;
  SampleMode sample_mode = SampleMode::kStochastic;
  bool use_sam_in_finetune = true;
  bool head_warm_start = false;
  bool augment_train = true;
  int eval_every = 1;  // fine-tuning: epochs between val passes (0 = never)

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double l_con = 0.0;
  double l_cls = 0.0;
  double l_total = 0.0;
  double lr = 0.0;
  std::optional<double> train_acc;
  std::optional<double> val_acc;
  double wall_time_s = 0.0;

  nlohmann::json to_json() const;
};

/// Observer hook; pointers are valid only during the callback.
struct StepTrace {
  int epoch = 0;
  int step = 0;
  const std::vector<size_t>* sample_indices = nullptr;
  const std::vector<TokenPartition>* partitions = nullptr;  // empty on full-token steps
  const Mat* patches = nullptr;                             // normalized input patches
  const std::vector<int>* labels = nullptr;
  double l_con = 0.0;
  double l_cls = 0.0;
  double l_total = 0.0;
};
using StepObserver = std::function<void(const StepTrace&)>;

struct TrainResult {
  std::vector<EpochMetrics> log;
};

struct EvalReport {
  double top1 = 0.0;
  std::vector<double> per_class_acc;
  double mean_per_class_acc = 0.0;
  std::vector<std::vector<int>> confusion;
  int count = 0;

  nlohmann::json to_json() const;
};

enum class HeadKind { kPretrainCls, kFinetune };

/// Refreshes the masking-weight cache: one full-token evaluation pass per
/// image (canonical image, eval transform), class-token attention from the
/// last block, bilinear upsampling to the canonical resolution.
void update_masking_weights(MaskedAutoencoder& model, const Dataset& ds, const std::vector<size_t>& indices,
                            int epoch, WeightCache& cache, int batch_size = 64);

/// Joint reconstruction + classification pre-training with the configured
/// masking strategy. Random masking is used before warmup completes; the
/// weight cache is refreshed every weight_update_interval epochs afterwards.
TrainResult pretrain(MaskedAutoencoder& model, const Dataset& ds, const TrainRunConfig& cfg, Strategy strategy,
                     WeightCache& cache, const std::string& run_dir = "", const StepObserver& observer = nullptr);

/// Attention-driven-masked fine-tuning (cross-entropy only, no decoder).
/// The cache is initialized before epoch 0 and refreshed on the fine-tuning
/// interval. cfg.use_sam_in_finetune=false gives full-token fine-tuning.
TrainResult finetune(MaskedAutoencoder& model, const Dataset& ds, const TrainRunConfig& cfg, WeightCache& cache,
                     const std::string& run_dir = "", const StepObserver& observer = nullptr);

/// Full-token evaluation (no masking anywhere in the test path).
EvalReport evaluate(MaskedAutoencoder& model, const Dataset& ds, const std::vector<size_t>& indices,
                    bool global_pool, HeadKind head);

nlohmann::json patch_config_to_json(const PatchConfig& cfg);
PatchConfig patch_config_from_json(const nlohmann::json& j);

void save_model_checkpoint(const std::string& path, MaskedAutoencoder& model, const std::string& phase, int epoch,
                           uint64_t seed, const Dataset* ds);

}  // namespace samlab
