#pragma once

#include <string>

#include "samlab/cli/config.hpp"

namespace samlab::cli {

std::string resolve_run_dir(const std::string& explicit_dir, const std::string& command);

int cmd_pretrain(const ConfigMap& cfg, const std::string& run_dir_arg);
int cmd_finetune(const ConfigMap& cfg, const std::string& checkpoint, const std::string& run_dir_arg);
int cmd_eval(const std::string& run_dir, const std::string& split);
int cmd_maskdump(const std::string& run_dir, int n_images, const std::string& out_dir);
int cmd_flops(const ConfigMap& cfg, const std::string& csv_path);

}  // namespace samlab::cli
