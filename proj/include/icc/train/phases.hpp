#pragma once

#include <algorithm>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "icc/contrastive/kmeans.hpp"
#include "icc/contrastive/loss.hpp"
#include "icc/data/transforms.hpp"
#include "icc/metrics/report.hpp"
#include "icc/network/heads.hpp"
#include "icc/network/probe.hpp"
#include "icc/nn/adamw.hpp"
#include "icc/train/config.hpp"
#include "icc/train/label_store.hpp"

namespace icc::train {

struct PhaseResult {
  /// Mean batch loss per epoch.
  std::vector<double> losses;
  /// Learning rate of each optimizer group as read back from the optimizer.
  std::map<std::string, double> lr;
  long steps = 0;
  /// Batches dropped because no anchor had both positives and negatives.
  long skipped_batches = 0;
};

inline double contrast_learning_rate(const TrainConfig& config, int iteration) {
  return iteration >= 2 ? config.contrast.lr * config.contrast_lr_decay_after_first : config.contrast.lr;
}

namespace detail {

inline std::vector<std::vector<std::string>> make_batches(std::vector<std::string> ids, int batch_size, Rng& rng) {
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < ids.size(); i += static_cast<std::size_t>(batch_size))
    out.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(i),
                     ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), i + static_cast<std::size_t>(batch_size))));
  return out;
}

inline void log_epoch(const PhaseContext& ctx, const std::string& phase, int iteration, int epoch, const std::vector<double>& batch_losses) {
  if (!ctx.log) return;
  double mean = 0.0;
  for (double l : batch_losses) mean += l;
  if (!batch_losses.empty()) mean /= static_cast<double>(batch_losses.size());
  ctx.log({phase, iteration, epoch, mean, static_cast<int>(batch_losses.size())});
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace detail

/// A forwarded batch: one decoder output and multi-resolution feature per video.
struct ForwardedBatch {
  std::vector<net::DecoderFeatures> dec;
  std::vector<net::MultiResFeature> feat;
};

inline ForwardedBatch forward_batch(const net::Backbone& backbone, const std::vector<data::FeatureSequence>& inputs,
                                    const TrainConfig& config) {
  ForwardedBatch b;
  for (const auto& v : inputs) {
    auto dec = backbone.forward(v.data);
    b.feat.push_back(net::multires_feature(dec, dec.input_len, config.feature_upsample, config.feature_norm));
    b.dec.push_back(std::move(dec));
  }
  return b;
}

/// Contrastive loss of a forwarded batch given per-video frame labels at the
/// batch's resolution. Returns nullopt when the frame term has no valid anchor
/// and the video term is skipped as well.
inline std::optional<nn::Var> batch_contrast_loss(const ForwardedBatch& batch, const std::vector<data::FeatureSequence>& inputs,
                                                  const std::vector<std::vector<int>>& labels,
                                                  const contrast::ContrastConfig& config, Rng& sampler) {
  std::vector<std::vector<contrast::SampleIndex>> samples;
  std::vector<nn::Var> sampled, summaries;
  std::vector<std::optional<int>> activities;
  std::vector<const std::vector<int>*> label_ptrs;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    auto s = contrast::sample_frames(inputs[n].length(), config, sampler, static_cast<int>(n));
    std::vector<Index> rows;
    for (const auto& x : s) rows.push_back(x.frame);
    sampled.push_back(nn::gather_rows(batch.feat[n].f, std::move(rows)));
    summaries.push_back(net::video_summary(batch.feat[n]));
    activities.push_back(inputs[n].activity);
    label_ptrs.push_back(&labels[n]);
    samples.push_back(std::move(s));
  }
  const auto sets = contrast::build_sets(samples, label_ptrs, activities, config);
  std::optional<nn::Var> total;
  try {
    total = contrast::frame_contrast_loss(nn::concat_rows(sampled), sets, config.tau);
  } catch (const NoValidAnchors&) {
  }
  if (config.use_video_level) {
    contrast::LossResult info;
    auto v = contrast::video_contrast_loss(nn::concat_rows(summaries), activities, config.tau, &info);
    if (!info.skipped) total = total ? nn::add(*total, v) : v;
  }
  return total;
}

/// Downsampled (and, when enabled, window-augmented) copies of a batch.
inline std::vector<data::FeatureSequence> prepare_inputs(const data::Dataset& ds, const std::vector<std::string>& ids,
                                                         const data::DownsampleConfig& config, Rng& augment,
                                                         std::vector<int>* windows = nullptr) {
  std::vector<data::FeatureSequence> out;
  for (const auto& id : ids) {
    const int w = data::sample_augment_window(config, augment);
    if (windows) windows->push_back(w);
    const auto& src = ds.video(id);
    out.push_back({src.video_id, data::downsample_features(src.data, w), src.activity});
  }
  return out;
}

using BatchLabeler = std::function<std::vector<std::vector<int>>(const std::vector<std::string>& ids,
                                                                 const std::vector<data::FeatureSequence>& inputs,
                                                                 const std::vector<int>& windows, Rng& cluster)>;

/// Shared loop of unsupervised pretraining and the contrast step: only the
/// source of the frame labels differs.
inline PhaseResult run_contrast_phase(net::Backbone& backbone, const data::Dataset& ds, const PhaseContext& ctx,
                                      double lr, const std::string& phase, int iteration, Rng& rng,
                                      const BatchLabeler& labeler) {
  ctx.contrast.validate();
  nn::AdamW opt({{"backbone", backbone.parameters(), lr, ctx.train.contrast.weight_decay}});
  PhaseResult r;
  r.lr["backbone"] = opt.lr("backbone");
  for (int epoch = 1; epoch <= ctx.train.contrast_epochs(iteration); ++epoch) {
    Rng order = rng.child("sampler-order", static_cast<std::uint64_t>(epoch));
    Rng sampler = rng.child("sampler", static_cast<std::uint64_t>(epoch));
    Rng cluster = rng.child("cluster", static_cast<std::uint64_t>(epoch));
    Rng augment = rng.child("augment", static_cast<std::uint64_t>(epoch));
    std::vector<double> batch_losses;
    for (const auto& ids : detail::make_batches(ds.train_ids, ctx.train.contrast.batch_size, order)) {
      std::vector<int> windows;
      const auto inputs = prepare_inputs(ds, ids, ctx.downsample, augment, &windows);
      const auto labels = labeler(ids, inputs, windows, cluster);
      const auto batch = forward_batch(backbone, inputs, ctx.train);
      auto loss = batch_contrast_loss(batch, inputs, labels, ctx.contrast, sampler);
      if (!loss) {
        ++r.skipped_batches;
        continue;
      }
      opt.zero_grad();
      nn::backward(*loss);
      opt.step();
      batch_losses.push_back(loss->value()(0, 0));
    }
    r.losses.push_back(detail::mean_of(batch_losses));
    detail::log_epoch(ctx, phase, iteration, epoch, batch_losses);
  }
  r.steps = opt.steps();
  return r;
}

/// Contrastive pretraining on cluster labels from k-means over each batch's
/// input frames. Uses every training video; labels are never read.
inline PhaseResult pretrain_unsupervised(net::Backbone& backbone, const data::Dataset& ds, const PhaseContext& ctx, Rng& rng,
                                         int iteration = 1) {
  const int k = ctx.contrast.effective_clusters(ds.vocab.num_actions());
  auto labeler = [k](const std::vector<std::string>&, const std::vector<data::FeatureSequence>& inputs,
                     const std::vector<int>&, Rng& cluster) {
    std::vector<std::vector<int>> out;
    for (auto& ls : contrast::cluster_batch(inputs, k, cluster)) out.push_back(std::move(ls.labels));
    return out;
  };
  return run_contrast_phase(backbone, ds, ctx, ctx.train.contrast.lr, "pretrain", iteration, rng, labeler);
}

/// Contrast step of iteration >= 2: sets come from stored ground-truth and
/// pseudo labels, downsampled with each video's window.
inline PhaseResult contrast_step(net::Backbone& backbone, const data::Dataset& ds, const LabelStore& store,
                                 const PhaseContext& ctx, int iteration, Rng& rng) {
  for (const auto& id : ds.train_ids) (void)store.at(id);
  auto labeler = [&store](const std::vector<std::string>& ids, const std::vector<data::FeatureSequence>&,
                          const std::vector<int>& windows, Rng&) {
    std::vector<std::vector<int>> out;
    for (std::size_t i = 0; i < ids.size(); ++i) out.push_back(data::downsample_labels(store.at(ids[i]).labels, windows[i]));
    return out;
  };
  return run_contrast_phase(backbone, ds, ctx, contrast_learning_rate(ctx.train, iteration), "contrast", iteration, rng,
                            labeler);
}

struct ClassifyOptions {
  double backbone_lr = 0.0;
  double heads_lr = 0.0;
  int epochs = 0;
  /// Add the contrastive term with ground-truth sets.
  bool with_contrast = true;
  std::string phase = "classify";
};

/// Joint cross-entropy (on the ensemble prediction) and supervised
/// contrastive training on labeled videos only.
inline PhaseResult classify_with(net::Backbone& backbone, net::ClassifierHeads& heads, const data::Dataset& ds,
                                 const std::vector<std::string>& labeled, const PhaseContext& ctx,
                                 const ClassifyOptions& opts, int iteration, Rng& rng) {
  if (labeled.empty()) throw EmptyLabeledSet("the classify step needs at least one labeled video");
  for (const auto& id : labeled) (void)ds.truth(id);
  const auto& hc = ctx.train.classify_heads;
  nn::AdamW opt({{"backbone", backbone.parameters(), opts.backbone_lr, hc.weight_decay},
                 {"heads", heads.parameters(), opts.heads_lr, hc.weight_decay}});
  PhaseResult r;
  r.lr["backbone"] = opt.lr("backbone");
  r.lr["heads"] = opt.lr("heads");
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    Rng order = rng.child("sampler-order", static_cast<std::uint64_t>(epoch));
    Rng sampler = rng.child("sampler", static_cast<std::uint64_t>(epoch));
    Rng augment = rng.child("augment", static_cast<std::uint64_t>(epoch));
    std::vector<double> batch_losses;
    for (const auto& ids : detail::make_batches(labeled, hc.batch_size, order)) {
      std::vector<int> windows;
      const auto inputs = prepare_inputs(ds, ids, ctx.downsample, augment, &windows);
      std::vector<std::vector<int>> labels;
      for (std::size_t i = 0; i < ids.size(); ++i) labels.push_back(data::downsample_labels(ds.truth(ids[i]).labels, windows[i]));
      const auto batch = forward_batch(backbone, inputs, ctx.train);
      std::vector<nn::Var> ce;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto pred = net::predict_ensemble(batch.dec[i], heads, inputs[i].length());
        ce.push_back(nn::nll_of_probabilities(pred.probabilities, labels[i], inputs[i].length()));
      }
      nn::Var loss = nn::weighted_sum(ce, std::vector<double>(ce.size(), 1.0 / static_cast<double>(ce.size())));
      if (opts.with_contrast)
        if (auto con = batch_contrast_loss(batch, inputs, labels, ctx.contrast, sampler)) loss = nn::add(loss, *con);
      opt.zero_grad();
      nn::backward(loss);
      opt.step();
      batch_losses.push_back(loss.value()(0, 0));
    }
    r.losses.push_back(detail::mean_of(batch_losses));
    detail::log_epoch(ctx, opts.phase, iteration, epoch, batch_losses);
  }
  r.steps = opt.steps();
  return r;
}

inline PhaseResult classify_step(net::Backbone& backbone, net::ClassifierHeads& heads, const data::Dataset& ds,
                                 const std::vector<std::string>& labeled, const PhaseContext& ctx, int iteration, Rng& rng) {
  ClassifyOptions opts;
  opts.backbone_lr = ctx.train.classify_backbone_lr;
  opts.heads_lr = ctx.train.classify_heads.lr;
  opts.epochs = ctx.train.classify_heads.epochs;
  return classify_with(backbone, heads, ds, labeled, ctx, opts, iteration, rng);
}

/// Frame labels at the original frame rate predicted by the heads.
inline std::vector<int> predict_labels(const net::Backbone& backbone, const net::ClassifierHeads& heads,
                                       const data::FeatureSequence& video, int w0) {
  nn::NoGradGuard no_grad;
  const Matrix x = data::downsample_features(video.data, w0);
  const auto dec = backbone.forward(x);
  return net::predict_ensemble(dec, heads, video.length()).labels.labels;
}

/// Overwrites the store entries of unlabeled videos with hard argmax
/// predictions. Rejects any id that carries ground truth.
inline void generate_pseudo_labels(const net::Backbone& backbone, const net::ClassifierHeads& heads, const data::Dataset& ds,
                                   const std::vector<std::string>& ids, LabelStore& store, int w0) {
  for (const auto& id : ids)
    if (store.is_ground_truth(id) || ds.split.labeled_ids.count(id))
      throw InvalidArgument("'" + id + "' is a labeled video; pseudo-labels are for unlabeled videos only");
  for (const auto& id : ids) {
    data::LabelSequence ls{id, predict_labels(backbone, heads, ds.video(id), w0), data::LabelSource::kPseudo};
    store.set(std::move(ls));
  }
}

inline metrics::MetricReport evaluate_heads(const net::Backbone& backbone, const net::ClassifierHeads& heads,
                                            const data::Dataset& ds, const std::vector<std::string>& ids, int w0,
                                            metrics::Aggregation mof_mode = metrics::Aggregation::kFramePooled) {
  std::vector<std::vector<int>> preds, gts;
  for (const auto& id : ids) {
    preds.push_back(predict_labels(backbone, heads, ds.video(id), w0));
    gts.push_back(ds.truth(id).labels);
  }
  return metrics::evaluate(ids, preds, gts, mof_mode);
}

/// The representation f of a whole video at its original frame rate: each
/// downsampled frame's feature is repeated over its window.
inline Matrix representation(const net::Backbone& backbone, const data::FeatureSequence& video, int w0,
                             net::UpsampleMode mode = net::UpsampleMode::kNearest,
                             net::NormOrder order = net::NormOrder::kPerBlock) {
  nn::NoGradGuard no_grad;
  const Matrix x = data::downsample_features(video.data, w0);
  const auto dec = backbone.forward(x);
  const auto f = net::multires_feature(dec, dec.input_len, mode, order);
  Matrix out(video.length(), f.dim());
  for (Index t = 0; t < video.length(); ++t) out.row(t) = f.f.value().row(std::min<Index>(t / w0, x.rows() - 1));
  return out;
}

using Featurizer = std::function<Matrix(const data::FeatureSequence&)>;

struct LinearEvalResult {
  metrics::MetricReport report;
  net::LinearProbe probe;
};

/// Fits a linear probe on the features of every training video (with ground
/// truth) and scores it on the test videos.
inline LinearEvalResult linear_evaluation(const Featurizer& featurize, const data::Dataset& ds, const net::ProbeConfig& config = {},
                                          metrics::Aggregation mof_mode = metrics::Aggregation::kFramePooled) {
  std::vector<Matrix> xs;
  std::vector<std::vector<int>> ys;
  for (const auto& id : ds.train_ids) {
    xs.push_back(featurize(ds.video(id)));
    ys.push_back(ds.truth(id).labels);
  }
  LinearEvalResult r;
  r.probe = net::probe_train(xs, ys, ds.vocab.num_actions(), config);
  std::vector<std::vector<int>> preds, gts;
  for (const auto& id : ds.test_ids) {
    preds.push_back(r.probe.predict(featurize(ds.video(id))));
    gts.push_back(ds.truth(id).labels);
  }
  r.report = metrics::evaluate(ds.test_ids, preds, gts, mof_mode);
  return r;
}

inline Featurizer raw_features() {
  return [](const data::FeatureSequence& v) { return v.data; };
}

inline Featurizer backbone_features(const net::Backbone& backbone, int w0, net::UpsampleMode mode = net::UpsampleMode::kNearest,
                                    net::NormOrder order = net::NormOrder::kPerBlock) {
  return [&backbone, w0, mode, order](const data::FeatureSequence& v) { return representation(backbone, v, w0, mode, order); };
}

}  // namespace icc::train
