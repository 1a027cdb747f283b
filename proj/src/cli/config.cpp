#include "samlab/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace samlab::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "model",        "image_size",    "patch_size",    "embed_dim",       "num_heads",   "encoder_depth",
      "decoder_dim",  "decoder_depth", "decoder_heads", "num_classes",     "dataset",     "split_fraction",
      "strategy",     "mask_ratio",    "throw_ratio",   "lambda",          "norm_pix_loss", "epochs",
      "warmup_epochs", "base_lr",      "weight_decay",  "batch_size",      "update_interval", "layer_decay",
      "global_pool",  "seed",          "sample_mode",   "head_warm_start", "use_sam",     "augment",
      "eval_every",   "phase",         "checkpoint"};
  return keys;
}

int get_int(const ConfigMap& cfg, const std::string& key, int fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    size_t pos = 0;
    const int v = std::stoi(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (...) {
    throw Error("config: field '" + key + "': expected integer, got '" + it->second + "'");
  }
}

double get_double(const ConfigMap& cfg, const std::string& key, double fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (...) {
    throw Error("config: field '" + key + "': expected number, got '" + it->second + "'");
  }
}

bool get_bool(const ConfigMap& cfg, const std::string& key, bool fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw Error("config: field '" + key + "': expected boolean, got '" + it->second + "'");
}

std::string get_string(const ConfigMap& cfg, const std::string& key, const std::string& fallback) {
  auto it = cfg.find(key);
  return it == cfg.end() ? fallback : it->second;
}

uint64_t get_u64(const ConfigMap& cfg, const std::string& key, uint64_t fallback) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return fallback;
  try {
    size_t pos = 0;
    const uint64_t v = std::stoull(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (...) {
    throw Error("config: field '" + key + "': expected unsigned integer, got '" + it->second + "'");
  }
}

}  // namespace

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open file " + path);
  ConfigMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    check(eq != std::string::npos,
          "config: " + path + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    check(!key.empty(), "config: " + path + ":" + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

void merge(ConfigMap& base, const ConfigMap& overrides) {
  for (const auto& [k, v] : overrides) base[k] = v;
}

std::string dump_config(const ConfigMap& cfg) {
  std::ostringstream out;
  for (const auto& [k, v] : cfg) out << k << " = " << v << "\n";
  return out.str();
}

RunSpec build_run_spec(const ConfigMap& cfg, Phase phase) {
  for (const auto& [k, v] : cfg)
    check(known_keys().count(k) > 0, "config: unknown key '" + k + "'");

  RunSpec spec;

  const std::string preset = get_string(cfg, "model", "synth-tiny");
  if (preset == "synth-tiny") {
    spec.model = synth_tiny();
  } else if (preset == "vit-b") {
    spec.model = vit_base_patch16_224();
  } else if (preset == "custom") {
    // all dims must come from explicit keys below
  } else {
    throw Error("config: field 'model': expected synth-tiny, vit-b or custom, got '" + preset + "'");
  }
  const int image_size = get_int(cfg, "image_size", spec.model.image_h);
  spec.model.image_h = spec.model.image_w = image_size;
  spec.model.patch_size = get_int(cfg, "patch_size", spec.model.patch_size);
  spec.model.embed_dim = get_int(cfg, "embed_dim", spec.model.embed_dim);
  spec.model.num_heads = get_int(cfg, "num_heads", spec.model.num_heads);
  spec.model.encoder_depth = get_int(cfg, "encoder_depth", spec.model.encoder_depth);
  spec.model.decoder_dim = get_int(cfg, "decoder_dim", spec.model.decoder_dim);
  spec.model.decoder_depth = get_int(cfg, "decoder_depth", spec.model.decoder_depth);
  spec.model.decoder_heads = get_int(cfg, "decoder_heads", spec.model.decoder_heads);
  spec.model.num_classes = get_int(cfg, "num_classes", spec.model.num_classes);

  TrainRunConfig& t = spec.train;
  if (phase == Phase::kPretrain) {
    t.epochs = 300;
    t.warmup_epochs = 40;
    t.batch_size = 64;
    t.weight_update_interval = 40;
  } else {
    t.epochs = 100;
    t.warmup_epochs = 5;
    t.batch_size = 256;
    t.weight_update_interval = 20;
  }
  t.epochs = get_int(cfg, "epochs", t.epochs);
  t.warmup_epochs = get_int(cfg, "warmup_epochs", t.warmup_epochs);
  t.base_lr = get_double(cfg, "base_lr", t.base_lr);
  t.weight_decay = get_double(cfg, "weight_decay", t.weight_decay);
  t.batch_size = get_int(cfg, "batch_size", t.batch_size);
  t.ratios.mask_ratio = get_double(cfg, "mask_ratio", t.ratios.mask_ratio);
  t.ratios.throw_ratio = get_double(cfg, "throw_ratio", t.ratios.throw_ratio);
  t.weight_update_interval = get_int(cfg, "update_interval", t.weight_update_interval);
  t.layerwise_lr_decay = get_double(cfg, "layer_decay", t.layerwise_lr_decay);
  t.global_pool = get_bool(cfg, "global_pool", t.global_pool);
  t.seed = get_u64(cfg, "seed", t.seed);
  t.loss.lambda_cls = get_double(cfg, "lambda", t.loss.lambda_cls);
  t.loss.normalize_pixel_targets = get_bool(cfg, "norm_pix_loss", t.loss.normalize_pixel_targets);
  t.head_warm_start = get_bool(cfg, "head_warm_start", t.head_warm_start);
  t.use_sam_in_finetune = get_bool(cfg, "use_sam", t.use_sam_in_finetune);
  t.augment_train = get_bool(cfg, "augment", t.augment_train);
  t.eval_every = get_int(cfg, "eval_every", t.eval_every);

  const std::string mode = get_string(cfg, "sample_mode", "stochastic");
  if (mode == "stochastic") {
    t.sample_mode = SampleMode::kStochastic;
  } else if (mode == "deterministic") {
    t.sample_mode = SampleMode::kDeterministic;
  } else {
    throw Error("config: field 'sample_mode': expected stochastic or deterministic, got '" + mode + "'");
  }

  spec.strategy = strategy_from_string(get_string(cfg, "strategy", "sam"));
  // the attention-only baseline is the lambda = 0 configuration
  if (spec.strategy == Strategy::kAmt && cfg.find("lambda") == cfg.end()) spec.train.loss.lambda_cls = 0.0;

  spec.dataset_uri = get_string(cfg, "dataset", "synth:512:4:64");
  spec.split_fraction = get_double(cfg, "split_fraction", 0.8);
  check(spec.split_fraction > 0.0 && spec.split_fraction <= 1.0, "config: field 'split_fraction': must be in (0,1]");

  spec.train.validate();
  return spec;
}

Dataset load_dataset_from_uri(const std::string& uri, uint64_t seed, double split_fraction) {
  const auto colon = uri.find(':');
  check(colon != std::string::npos, "dataset: expected '<scheme>:<spec>', got '" + uri + "'");
  const std::string scheme = uri.substr(0, colon);
  const std::string rest = uri.substr(colon + 1);

  if (scheme == "synth") {
    int n = 512, classes = 4, size = 64;
    std::istringstream ss(rest);
    std::string tok;
    int field = 0;
    while (std::getline(ss, tok, ':')) {
      try {
        if (field == 0) n = std::stoi(tok);
        if (field == 1) classes = std::stoi(tok);
        if (field == 2) size = std::stoi(tok);
      } catch (...) {
        throw Error("dataset: bad synth spec '" + uri + "'");
      }
      ++field;
    }
    Dataset ds = generate_synthetic_lesion_dataset(n, classes, size, seed);
    ds.split(split_fraction, seed);
    return ds;
  }
  if (scheme == "folder") return load_image_folder(rest, split_fraction, seed);
  if (scheme == "synthdir") return load_synthetic_dataset(rest, split_fraction, seed);
  throw Error("dataset: unknown scheme '" + scheme + "' (expected synth, folder or synthdir)");
}

}  // namespace samlab::cli
