#pragma once

#include <map>
#include <string>

#include "samlab/data/dataset.hpp"
#include "samlab/model/vit.hpp"
#include "samlab/train/trainer.hpp"

namespace samlab::cli {

/// Flat key = value configuration; file values can be overridden by flags.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap load_config_file(const std::string& path);
void merge(ConfigMap& base, const ConfigMap& overrides);
std::string dump_config(const ConfigMap& cfg);

enum class Phase { kPretrain, kFinetune };

struct RunSpec {
  PatchConfig model;
  TrainRunConfig train;
  Strategy strategy = Strategy::kSam;
  std::string dataset_uri;
  double split_fraction = 0.8;
};

/// Applies phase defaults, then the map; unknown keys and malformed values
/// produce field-level errors.
RunSpec build_run_spec(const ConfigMap& cfg, Phase phase);

/// synth:<n>[:<classes>[:<size>]], synthdir:<path>, folder:<path>
Dataset load_dataset_from_uri(const std::string& uri, uint64_t seed, double split_fraction);

}  // namespace samlab::cli
