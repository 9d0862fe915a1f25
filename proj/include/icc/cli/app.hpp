#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "icc/cli/config.hpp"
#include "icc/data/io.hpp"
#include "icc/data/synth.hpp"
#include "icc/data/transforms.hpp"
#include "icc/network/checkpoint.hpp"
#include "icc/train/icc.hpp"

namespace icc::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitRuntime = 4 };

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kUsage: return kExitUsage;
    case ErrorKind::kData: return kExitData;
    case ErrorKind::kRuntime: return kExitRuntime;
  }
  return kExitRuntime;
}

/// Loads `data_dir` when set, otherwise generates the synthetic dataset.
inline data::Dataset build_dataset(const RunConfig& c) {
  if (c.data_dir.empty()) {
    data::SplitSpec split{c.split.test_fraction, c.split.labeled_fraction, c.split.min_labeled, c.seed};
    return data::synth_dataset(c.synth, split);
  }
  if (!std::filesystem::is_directory(c.data_dir))
    throw InvalidArgument("dataset directory '" + c.data_dir + "' does not exist");
  auto ds = data::load_dataset(c.data_dir);
  if (c.split.resplit) {
    ds.split = data::make_split(ds.train_ids, c.split.labeled_fraction, c.seed, c.split.min_labeled);
    ds.train_ids.assign(ds.split.labeled_ids.begin(), ds.split.labeled_ids.end());
    ds.train_ids.insert(ds.train_ids.end(), ds.split.unlabeled_ids.begin(), ds.split.unlabeled_ids.end());
  }
  return ds;
}

inline train::PhaseContext make_context(const RunConfig& c) {
  train::PhaseContext ctx;
  ctx.backbone = c.backbone;
  ctx.contrast = c.contrast;
  ctx.downsample = c.downsample;
  ctx.train = c.train;
  return ctx;
}

namespace detail {

/// Flags shared by every command. Unset flags leave the config untouched.
struct CommonFlags {
  std::string config_path;
  std::string data_dir;
  std::string out_dir;
  std::uint64_t seed = 0;
  int w0 = 0;
  bool verbose = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* w0_opt = nullptr;
  CLI::Option* data_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    data_opt = cmd->add_option("--data", data_dir, "dataset directory (default: synthetic)");
    cmd->add_option("--out", out_dir, "output directory");
    seed_opt = cmd->add_option("--seed", seed, "root seed");
    w0_opt = cmd->add_option("--w0", w0, "temporal downsampling window")->check(CLI::PositiveNumber);
    cmd->add_flag("--verbose,-v", verbose, "log every epoch to stderr");
  }

  RunConfig resolve(RunConfig base) const {
    if (!config_path.empty()) base = load_config(config_path, base);
    if (data_opt->count()) base.data_dir = data_dir;
    if (!out_dir.empty()) base.output_dir = out_dir;
    if (seed_opt->count()) {
      base.seed = seed;
      base.synth.seed = seed;
    }
    if (w0_opt->count()) base.downsample.w0 = w0;
    return base;
  }
};

/// Writes train_log.jsonl and, with --verbose, echoes epochs to `err`.
class RunLog {
 public:
  RunLog(const std::filesystem::path& path, bool append, bool verbose, std::ostream& err)
      : file_(path, append ? std::ios::app : std::ios::trunc), verbose_(verbose), err_(err) {
    if (!file_) throw IoError("cannot write '" + path.string() + "'");
  }

  train::EpochLogger logger() {
    return [this](const train::EpochLog& e) {
      file_ << train::to_json(e).dump() << '\n';
      file_.flush();
      if (verbose_)
        err_ << e.phase << " it=" << e.iteration << " epoch=" << e.epoch << " loss=" << metrics::format_value(e.loss)
             << '\n';
    };
  }

 private:
  std::ofstream file_;
  bool verbose_;
  std::ostream& err_;
};

inline std::filesystem::path prepare_output(RunConfig& c, const std::string& command) {
  const auto dir = resolve_output_dir(c.output_dir, "runs/" + command);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  save_config(dir / "config.json", c);
  return dir;
}

inline void write_phase_losses(const std::filesystem::path& path, const std::string& phase, int iteration,
                               const std::vector<double>& losses) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "phase,iteration,epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e)
    out << phase << ',' << iteration << ',' << e + 1 << ',' << metrics::format_value(losses[e]) << '\n';
}

}  // namespace detail

inline int cmd_synth_gen(RunConfig c, std::ostream& out) {
  c.apply_seed();
  c.validate();
  if (!c.data_dir.empty()) throw InvalidArgument("synth-gen generates data; --data is not accepted");
  const auto dir = resolve_output_dir(c.output_dir, "runs/synth");
  const auto ds = build_dataset(c);
  data::save_dataset(dir, ds);
  out << "wrote " << ds.videos.size() << " videos to " << dir.string() << '\n';
  return kExitOk;
}

inline int cmd_pretrain(RunConfig c, bool verbose, std::ostream& out, std::ostream& err) {
  c.apply_seed();
  c.validate();
  const auto ds = build_dataset(c);
  const auto dir = detail::prepare_output(c, "pretrain");
  detail::RunLog log(dir / "train_log.jsonl", false, verbose, err);
  auto ctx = make_context(c);
  ctx.log = log.logger();
  const Rng root(c.train.seed);
  Rng init = root.child("init");
  net::Backbone backbone(ctx.backbone_for(ds), init);
  Rng rng = root.child("contrast", 1);
  const auto result = train::pretrain_unsupervised(backbone, ds, ctx, rng);
  detail::write_phase_losses(dir / "loss.csv", "pretrain", 1, result.losses);
  nlohmann::json meta;
  meta["kind"] = "pretrain";
  meta["config"] = to_json(c);
  meta["seed"] = c.train.seed;
  meta["train_ids"] = ds.train_ids;
  meta["test_ids"] = ds.test_ids;
  meta["epochs"] = c.train.contrast.epochs;
  net::save_checkpoint(dir / "pretrain.bin", backbone, nullptr, nullptr, meta);
  out << "pretrain: " << result.losses.size() << " epochs";
  if (!result.losses.empty()) out << ", final loss " << metrics::format_value(result.losses.back());
  out << ", checkpoint " << (dir / "pretrain.bin").string() << '\n';
  return kExitOk;
}

struct IccFlags {
  bool skip_pretrain = false;
  bool resume = false;
  bool baseline = false;
  int stop_after = 0;
};

inline int cmd_icc(RunConfig c, const IccFlags& flags, bool verbose, std::ostream& out, std::ostream& err) {
  c.apply_seed();
  c.validate();
  const auto ds = build_dataset(c);
  const auto dir = detail::prepare_output(c, "icc");
  detail::RunLog log(dir / "train_log.jsonl", flags.resume, verbose, err);
  auto ctx = make_context(c);
  ctx.log = log.logger();

  train::IccOptions options;
  options.skip_pretrain = flags.skip_pretrain;
  options.checkpoint_dir = dir / "ckpt";
  options.resume = flags.resume;
  options.stop_after = flags.stop_after;
  options.extra_meta["config"] = to_json(c);
  std::filesystem::create_directories(*options.checkpoint_dir);

  const auto history = train::run_icc(ds, ctx, options);
  train::write_history_csv(dir / "history.csv", history);
  train::write_loss_csv(dir / "loss.csv", history);
  for (const auto& r : history.records) {
    out << "ICC_" << r.iteration << ": ";
    metrics::print_report(out, r.test);
  }
  if (flags.baseline) {
    const auto sup = train::train_supervised(ds, ctx);
    metrics::write_report_csv(dir / "supervised.csv", sup.test);
    out << "supervised: ";
    metrics::print_report(out, sup.test);
  }
  return kExitOk;
}

struct EvalFlags {
  std::string checkpoint;
  std::string split = "test";
  bool probe = false;
  bool allow_train_eval = false;
};

inline int cmd_eval(RunConfig c, const EvalFlags& flags, std::ostream& out) {
  c.apply_seed();
  c.validate();
  auto ck = net::load_checkpoint(flags.checkpoint);
  const auto ds = build_dataset(c);
  const auto dir = detail::prepare_output(c, "eval");

  if (flags.probe && flags.split != "test") throw InvalidArgument("--probe fits on the training split and scores the test split");
  const std::vector<std::string>& ids = flags.split == "train" ? ds.train_ids : ds.test_ids;
  std::set<std::string> trained_on;
  if (ck.meta.contains("train_ids")) {
    auto t = ck.meta.at("train_ids").get<std::vector<std::string>>();
    trained_on.insert(t.begin(), t.end());
  }
  if (!flags.allow_train_eval) {
    for (const auto& id : ids)
      if (trained_on.count(id))
        throw InvalidArgument("video '" + id + "' was used to train this checkpoint; pass --allow-train-eval to score it");
  }

  const int w0 = c.downsample.w0;
  metrics::MetricReport report;
  if (flags.probe) {
    const auto feat = train::backbone_features(ck.backbone, w0, c.train.feature_upsample, c.train.feature_norm);
    report = train::linear_evaluation(feat, ds, c.train.probe).report;
  } else {
    if (!ck.heads) throw InvalidArgument("checkpoint has no classifier heads; use --probe");
    report = train::evaluate_heads(ck.backbone, *ck.heads, ds, ids, w0);
  }
  metrics::write_report_csv(dir / "report.csv", report);
  metrics::write_per_video_csv(dir / "per_video.csv", report);
  metrics::print_report(out, report, flags.probe ? "linear probe" : "heads");
  return kExitOk;
}

/// Entry point of the `icc` tool. Returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Semi-supervised temporal action segmentation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic dataset");
  auto* pretrain = app.add_subcommand("pretrain", "unsupervised contrastive pretraining");
  auto* icc = app.add_subcommand("icc", "iterative contrast-classify training");
  auto* eval = app.add_subcommand("eval", "score a checkpoint");
  detail::CommonFlags synth_common, pretrain_common, icc_common, eval_common;
  synth_common.attach(synth);
  pretrain_common.attach(pretrain);
  icc_common.attach(icc);
  eval_common.attach(eval);

  int epochs = 0;
  auto* epochs_opt = pretrain->add_option("--epochs", epochs, "contrast epochs")->check(CLI::NonNegativeNumber);

  IccFlags icc_flags;
  int iterations = 0;
  double labeled_fraction = 0.0;
  auto* iter_opt = icc->add_option("--iterations", iterations, "ICC iterations")->check(CLI::PositiveNumber);
  auto* frac_opt = icc->add_option("--labeled-fraction", labeled_fraction, "fraction of training videos with labels")
                       ->check(CLI::Range(0.0, 1.0));
  icc->add_flag("--skip-pretrain", icc_flags.skip_pretrain, "start from a random backbone");
  icc->add_flag("--resume", icc_flags.resume, "continue from the newest checkpoint");
  icc->add_flag("--baseline", icc_flags.baseline, "also train the supervised-only baseline");
  icc->add_option("--stop-after", icc_flags.stop_after)->group("");

  EvalFlags eval_flags;
  eval->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", eval_flags.split, "videos to score")->check(CLI::IsMember({"test", "train"}));
  eval->add_flag("--probe", eval_flags.probe, "fit a linear probe on the representation");
  eval->add_flag("--allow-train-eval", eval_flags.allow_train_eval, "permit scoring training videos");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth_gen(synth_common.resolve({}), out);
    if (*pretrain) {
      auto c = pretrain_common.resolve({});
      if (epochs_opt->count()) c.train.contrast.epochs = epochs;
      return cmd_pretrain(c, pretrain_common.verbose, out, err);
    }
    if (*icc) {
      auto c = icc_common.resolve({});
      if (iter_opt->count()) c.train.icc_iterations = iterations;
      if (frac_opt->count()) c.split.labeled_fraction = labeled_fraction;
      if (frac_opt->count() && !c.data_dir.empty()) c.split.resplit = true;
      return cmd_icc(c, icc_flags, icc_common.verbose, out, err);
    }
    RunConfig base;
    {
      auto ck = net::load_checkpoint(eval_flags.checkpoint);
      if (ck.meta.contains("config")) base = run_config_from_json(ck.meta.at("config"));
      base.output_dir.clear();
    }
    return cmd_eval(eval_common.resolve(base), eval_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace icc::cli
