#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "icc/network/checkpoint.hpp"
#include "icc/train/phases.hpp"

namespace icc::train {

struct IccRecord {
  int iteration = 0;
  std::vector<double> contrast_losses;
  std::vector<double> classify_losses;
  metrics::MetricReport test;
  /// NaN when the probe was not run.
  double probe_mof = std::numeric_limits<double>::quiet_NaN();
  std::string checkpoint;
  double wall_seconds = 0.0;
};

struct IccHistory {
  std::vector<IccRecord> records;

  const IccRecord& last() const { return records.back(); }
};

inline nlohmann::json to_json(const IccRecord& r) {
  nlohmann::json f1 = nlohmann::json::object();
  for (const auto& [thr, v] : r.test.f1) f1[std::to_string(thr)] = v;
  return {{"iteration", r.iteration},
          {"contrast_losses", r.contrast_losses},
          {"classify_losses", r.classify_losses},
          {"mof", r.test.mof},
          {"edit", r.test.edit},
          {"f1", f1},
          {"probe_mof", std::isnan(r.probe_mof) ? nlohmann::json(nullptr) : nlohmann::json(r.probe_mof)},
          {"checkpoint", r.checkpoint},
          {"wall_seconds", r.wall_seconds}};
}

inline IccRecord record_from_json(const nlohmann::json& j) {
  IccRecord r;
  r.iteration = j.at("iteration").get<int>();
  r.contrast_losses = j.at("contrast_losses").get<std::vector<double>>();
  r.classify_losses = j.at("classify_losses").get<std::vector<double>>();
  r.test.mof = j.at("mof").get<double>();
  r.test.edit = j.at("edit").get<double>();
  for (const auto& [k, v] : j.at("f1").items()) r.test.f1[std::stoi(k)] = v.get<double>();
  if (!j.at("probe_mof").is_null()) r.probe_mof = j.at("probe_mof").get<double>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

inline const char* kHistoryHeader = "iteration,mof,edit,f1_10,f1_25,f1_50,probe_mof,wall_seconds";

inline void write_history_csv(const std::filesystem::path& path, const IccHistory& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << kHistoryHeader << '\n';
  for (const auto& r : h.records) {
    out << r.iteration << ',' << metrics::report_row(r.test) << ','
        << (std::isnan(r.probe_mof) ? std::string("nan") : metrics::format_value(r.probe_mof)) << ','
        << metrics::format_value(r.wall_seconds) << '\n';
  }
}

/// Loss curves as "phase,iteration,epoch,loss".
inline void write_loss_csv(const std::filesystem::path& path, const IccHistory& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "phase,iteration,epoch,loss\n";
  for (const auto& r : h.records) {
    for (std::size_t e = 0; e < r.contrast_losses.size(); ++e)
      out << "contrast," << r.iteration << ',' << e + 1 << ',' << metrics::format_value(r.contrast_losses[e]) << '\n';
    for (std::size_t e = 0; e < r.classify_losses.size(); ++e)
      out << "classify," << r.iteration << ',' << e + 1 << ',' << metrics::format_value(r.classify_losses[e]) << '\n';
  }
}

struct IccOptions {
  /// Start iteration 1 from a randomly initialized backbone.
  bool skip_pretrain = false;
  /// Per-iteration checkpoints go to <dir>/icc_<i>.bin when set.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Continue from the newest checkpoint in checkpoint_dir.
  bool resume = false;
  /// Return after this many iterations (0: run all). Simulates an interruption.
  int stop_after = 0;
  /// Extra checkpoint metadata, e.g. the run configuration.
  nlohmann::json extra_meta = nlohmann::json::object();
};

inline std::vector<std::string> labeled_ids(const data::Dataset& ds) {
  return {ds.split.labeled_ids.begin(), ds.split.labeled_ids.end()};
}

inline std::vector<std::string> unlabeled_ids(const data::Dataset& ds) {
  return {ds.split.unlabeled_ids.begin(), ds.split.unlabeled_ids.end()};
}

inline void check_disjoint(const data::Dataset& ds) {
  const std::set<std::string> train(ds.train_ids.begin(), ds.train_ids.end());
  for (const auto& id : ds.test_ids)
    if (train.count(id)) throw InvalidArgument("test video '" + id + "' is also a training video");
  if (ds.test_ids.empty()) throw TooFewVideos("the test split is empty");
}

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir, int iteration) {
  return dir / ("icc_" + std::to_string(iteration) + ".bin");
}

/// Newest icc_<i>.bin in `dir` with i <= max_iteration, or 0.
inline int latest_checkpoint(const std::filesystem::path& dir, int max_iteration) {
  for (int i = max_iteration; i >= 1; --i)
    if (std::filesystem::exists(checkpoint_path(dir, i))) return i;
  return 0;
}

/// Iterative contrast-classify. Iteration 1 contrasts on cluster labels
/// (unless skip_pretrain), every iteration then runs a classify step and is
/// scored on the test split; all but the last also refresh the pseudo-labels
/// that drive the next contrast step.
inline IccHistory run_icc(const data::Dataset& ds, const PhaseContext& ctx, const IccOptions& options = {}) {
  ctx.train.validate();
  ctx.contrast.validate();
  check_disjoint(ds);
  const auto labeled = labeled_ids(ds);
  const auto unlabeled = unlabeled_ids(ds);
  if (labeled.empty()) throw EmptyLabeledSet("the split has no labeled videos");

  const Rng root(ctx.train.seed);
  const int w0 = ctx.downsample.w0;
  const auto start = std::chrono::steady_clock::now();
  double elapsed_before = 0.0;
  auto wall = [&] {
    return elapsed_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  Rng init = root.child("init");
  net::Backbone backbone(ctx.backbone_for(ds), init);
  IccHistory history;
  LabelStore store = LabelStore::from_dataset(ds);
  int first = 1;

  if (options.resume && options.checkpoint_dir) {
    const int done = latest_checkpoint(*options.checkpoint_dir, ctx.train.icc_iterations);
    if (done > 0) {
      auto ck = net::load_checkpoint(checkpoint_path(*options.checkpoint_dir, done));
      if (ck.meta.value("seed", std::uint64_t{0}) != ctx.train.seed ||
          ck.meta.value("train_ids", std::vector<std::string>{}) != ds.train_ids)
        throw InvalidArgument("checkpoint in '" + options.checkpoint_dir->string() + "' belongs to a different run");
      if (!ck.heads) throw MalformedFile("ICC checkpoint without classifier heads");
      backbone = std::move(ck.backbone);
      for (const auto& j : ck.meta.at("history")) history.records.push_back(record_from_json(j));
      elapsed_before = history.records.empty() ? 0.0 : history.records.back().wall_seconds;
      if (done < ctx.train.icc_iterations) generate_pseudo_labels(backbone, *ck.heads, ds, unlabeled, store, w0);
      first = done + 1;
    }
  }

  for (int it = first; it <= ctx.train.icc_iterations; ++it) {
    IccRecord rec;
    rec.iteration = it;
    Rng contrast_rng = root.child("contrast", static_cast<std::uint64_t>(it));
    if (it == 1) {
      if (!options.skip_pretrain) rec.contrast_losses = pretrain_unsupervised(backbone, ds, ctx, contrast_rng, it).losses;
    } else {
      rec.contrast_losses = contrast_step(backbone, ds, store, ctx, it, contrast_rng).losses;
    }

    Rng heads_rng = root.child("heads", static_cast<std::uint64_t>(it));
    net::ClassifierHeads heads(backbone.config(), ds.vocab.num_actions(), heads_rng);
    heads.set_alpha(ctx.train.ensemble_alpha);
    Rng classify_rng = root.child("classify", static_cast<std::uint64_t>(it));
    rec.classify_losses = classify_step(backbone, heads, ds, labeled, ctx, it, classify_rng).losses;
    rec.test = evaluate_heads(backbone, heads, ds, ds.test_ids, w0);
    if (ctx.train.probe_each_iteration)
      rec.probe_mof = linear_evaluation(backbone_features(backbone, w0, ctx.train.feature_upsample, ctx.train.feature_norm),
                                        ds, ctx.train.probe)
                          .report.mof;
    if (it < ctx.train.icc_iterations) generate_pseudo_labels(backbone, heads, ds, unlabeled, store, w0);
    rec.wall_seconds = wall();

    if (options.checkpoint_dir) {
      const auto path = checkpoint_path(*options.checkpoint_dir, it);
      rec.checkpoint = path.string();
      history.records.push_back(rec);
      nlohmann::json meta = options.extra_meta;
      meta["kind"] = "icc";
      meta["iteration"] = it;
      meta["seed"] = ctx.train.seed;
      meta["split_seed"] = ds.split.seed;
      meta["train_ids"] = ds.train_ids;
      meta["test_ids"] = ds.test_ids;
      meta["skip_pretrain"] = options.skip_pretrain;
      meta["downsample_w0"] = w0;
      nlohmann::json hist = nlohmann::json::array();
      for (const auto& r : history.records) hist.push_back(to_json(r));
      meta["history"] = hist;
      net::save_checkpoint(path, backbone, &heads, nullptr, meta);
    } else {
      history.records.push_back(rec);
    }
    if (options.stop_after > 0 && it >= options.stop_after) break;
  }
  return history;
}

struct SupervisedResult {
  net::Backbone backbone;
  net::ClassifierHeads heads;
  PhaseResult training;
  metrics::MetricReport test;
};

/// Baseline trained from scratch on the labeled videos with cross-entropy
/// only. Uses the same initialization stream as run_icc.
inline SupervisedResult train_supervised(const data::Dataset& ds, const PhaseContext& ctx) {
  ctx.train.validate();
  check_disjoint(ds);
  const Rng root(ctx.train.seed);
  Rng init = root.child("init");
  SupervisedResult r{net::Backbone(ctx.backbone_for(ds), init), {}, {}, {}};
  Rng heads_rng = root.child("heads", 0);
  r.heads = net::ClassifierHeads(r.backbone.config(), ds.vocab.num_actions(), heads_rng);
  r.heads.set_alpha(ctx.train.ensemble_alpha);
  ClassifyOptions opts;
  opts.backbone_lr = ctx.train.contrast.lr;
  opts.heads_lr = ctx.train.classify_heads.lr;
  opts.epochs = ctx.train.baseline_epochs();
  opts.with_contrast = false;
  opts.phase = "supervised";
  Rng rng = root.child("supervised");
  r.training = classify_with(r.backbone, r.heads, ds, labeled_ids(ds), ctx, opts, 0, rng);
  r.test = evaluate_heads(r.backbone, r.heads, ds, ds.test_ids, ctx.downsample.w0);
  return r;
}

}  // namespace icc::train
