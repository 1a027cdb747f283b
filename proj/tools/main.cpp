#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "samlab/cli/commands.hpp"

using samlab::cli::ConfigMap;

namespace {

// Collects --config file contents plus any explicitly passed override flags.
struct CommonOpts {
  std::string config_file;
  std::string run_dir;
  ConfigMap overrides;
};

void add_override_flags(CLI::App* cmd, CommonOpts& opts) {
  auto track = [&opts](const std::string& key) {
    return [&opts, key](const std::string& value) { opts.overrides[key] = value; };
  };
  cmd->add_option_function<std::string>("--dataset", track("dataset"), "Dataset URI (synth:<n>[:k[:size]], folder:<path>, synthdir:<path>)");
  cmd->add_option_function<std::string>("--strategy", track("strategy"), "Masking strategy: random, amt or sam");
  cmd->add_option_function<std::string>("--mask-ratio", track("mask_ratio"), "Mask ratio r");
  cmd->add_option_function<std::string>("--throw-ratio", track("throw_ratio"), "Throw ratio t");
  cmd->add_option_function<std::string>("--lambda", track("lambda"), "Classification loss weight");
  cmd->add_option_function<std::string>("--epochs", track("epochs"), "Training epochs");
  cmd->add_option_function<std::string>("--warmup-epochs", track("warmup_epochs"), "Warmup epochs");
  cmd->add_option_function<std::string>("--batch-size", track("batch_size"), "Batch size");
  cmd->add_option_function<std::string>("--base-lr", track("base_lr"), "Base learning rate");
  cmd->add_option_function<std::string>("--weight-decay", track("weight_decay"), "Weight decay");
  cmd->add_option_function<std::string>("--update-interval", track("update_interval"), "Masking weight update interval (epochs)");
  cmd->add_option_function<std::string>("--seed", track("seed"), "RNG seed");
  cmd->add_option_function<std::string>("--model", track("model"), "Model preset: synth-tiny, vit-b or custom");
  cmd->add_option_function<std::string>("--image-size", track("image_size"), "Square input size");
  cmd->add_option_function<std::string>("--patch-size", track("patch_size"), "Patch size");
  cmd->add_option_function<std::string>("--embed-dim", track("embed_dim"), "Encoder embedding dim");
  cmd->add_option_function<std::string>("--num-heads", track("num_heads"), "Encoder attention heads");
  cmd->add_option_function<std::string>("--encoder-depth", track("encoder_depth"), "Encoder blocks");
  cmd->add_option_function<std::string>("--decoder-dim", track("decoder_dim"), "Decoder embedding dim");
  cmd->add_option_function<std::string>("--decoder-depth", track("decoder_depth"), "Decoder blocks");
  cmd->add_option_function<std::string>("--decoder-heads", track("decoder_heads"), "Decoder attention heads");
  cmd->add_option_function<std::string>("--sample-mode", track("sample_mode"), "stochastic or deterministic sampling");
  cmd->add_option_function<std::string>("--layer-decay", track("layer_decay"), "Layer-wise lr decay (fine-tuning)");
  cmd->add_option_function<std::string>("--split-fraction", track("split_fraction"), "Train split fraction");
  cmd->add_option_function<std::string>("--eval-every", track("eval_every"), "Validation interval in epochs (fine-tuning)");
  cmd->add_option_function<std::string>("--global-pool", track("global_pool"), "Use global pooling feature (true/false)");
  cmd->add_option_function<std::string>("--norm-pix-loss", track("norm_pix_loss"), "Standardize reconstruction targets (true/false)");
  cmd->add_option_function<std::string>("--augment", track("augment"), "Random crop/flip augmentation (true/false)");
  cmd->add_option_function<std::string>("--head-warm-start", track("head_warm_start"), "Warm start the fine-tuning head");
}

ConfigMap resolve_config(const CommonOpts& opts) {
  ConfigMap cfg;
  if (!opts.config_file.empty()) cfg = samlab::cli::load_config_file(opts.config_file);
  samlab::cli::merge(cfg, opts.overrides);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked-autoencoder training laboratory with attention-driven masking"};
  app.require_subcommand(1);

  CommonOpts pre_opts, ft_opts, flops_opts;
  std::string ft_checkpoint;
  std::string eval_run_dir, eval_split = "val";
  std::string dump_run_dir, dump_out;
  int dump_n = 4;
  std::string flops_csv;
  bool ft_no_sam = false;

  auto* pre = app.add_subcommand("pretrain", "Joint reconstruction + classification pre-training");
  pre->add_option("--config", pre_opts.config_file, "Config file (key = value lines)");
  pre->add_option("--run-dir", pre_opts.run_dir, "Run directory (default: $SAMLAB_RUN_ROOT/<cmd>-<stamp>)");
  add_override_flags(pre, pre_opts);

  auto* ft = app.add_subcommand("finetune", "Attention-masked classification fine-tuning");
  ft->add_option("--config", ft_opts.config_file, "Config file (key = value lines)");
  ft->add_option("--checkpoint", ft_checkpoint, "Pre-training checkpoint to warm start from");
  ft->add_option("--run-dir", ft_opts.run_dir, "Run directory");
  ft->add_flag("--no-sam", ft_no_sam, "Disable attention-driven masking (full-token fine-tuning)");
  add_override_flags(ft, ft_opts);

  auto* ev = app.add_subcommand("eval", "Full-token evaluation of a run directory");
  ev->add_option("run_dir", eval_run_dir, "Run directory")->required();
  ev->add_option("--split", eval_split, "train or val (default val)");

  auto* dump = app.add_subcommand("maskdump", "Export masking-weight maps and partitions");
  dump->add_option("run_dir", dump_run_dir, "Run directory")->required();
  dump->add_option("--n", dump_n, "Number of images (default 4)");
  dump->add_option("--out", dump_out, "Output directory (default <run_dir>/maskdump)");

  auto* fl = app.add_subcommand("flops", "Analytical FLOPs report (full-token vs attention-masked)");
  fl->add_option("--config", flops_opts.config_file, "Config file");
  fl->add_option("--csv", flops_csv, "Write a (mask_ratio, throw_ratio) sweep CSV");
  add_override_flags(fl, flops_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return samlab::cli::cmd_pretrain(resolve_config(pre_opts), pre_opts.run_dir);
    if (ft->parsed()) {
      ConfigMap cfg = resolve_config(ft_opts);
      if (ft_no_sam) cfg["use_sam"] = "false";
      return samlab::cli::cmd_finetune(cfg, ft_checkpoint, ft_opts.run_dir);
    }
    if (ev->parsed()) return samlab::cli::cmd_eval(eval_run_dir, eval_split);
    if (dump->parsed()) return samlab::cli::cmd_maskdump(dump_run_dir, dump_n, dump_out);
    if (fl->parsed()) return samlab::cli::cmd_flops(resolve_config(flops_opts), flops_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
