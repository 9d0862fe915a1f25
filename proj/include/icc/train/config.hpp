#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icc/contrastive/sampling.hpp"
#include "icc/data/types.hpp"
#include "icc/network/backbone.hpp"
#include "icc/network/multires.hpp"
#include "icc/network/probe.hpp"
#include "json.hpp"

namespace icc::train {

struct PhaseConfig {
  double lr = 1e-3;
  double weight_decay = 3e-3;
  int epochs = 10;
  int batch_size = 8;

  bool operator==(const PhaseConfig&) const = default;
};

struct TrainConfig {
  PhaseConfig contrast{1e-3, 3e-3, 30, 8};
  PhaseConfig classify_heads{1e-2, 3e-3, 60, 4};
  /// Backbone rate during the classify step; the heads use classify_heads.lr.
  double classify_backbone_lr = 1e-5;
  int icc_iterations = 4;
  /// Contrast-step learning rate multiplier from iteration 2 on.
  double contrast_lr_decay_after_first = 0.1;
  /// Epochs of contrast steps after the first iteration; 0 means contrast.epochs.
  int contrast_epochs_after_first = 0;
  /// Epochs of the CE-only baseline; 0 means classify_heads.epochs.
  int supervised_epochs = 0;
  net::UpsampleMode feature_upsample = net::UpsampleMode::kNearest;
  net::NormOrder feature_norm = net::NormOrder::kPerBlock;
  /// Ensemble weights of the per-layer classifier heads.
  std::array<double, net::kDecoderLayers> ensemble_alpha{1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6};
  /// Fit a linear probe on f after every classify step.
  bool probe_each_iteration = false;
  net::ProbeConfig probe{};
  std::uint64_t seed = 7;

  void validate() const {
    for (const auto* p : {&contrast, &classify_heads}) {
      if (!(p->lr >= 0.0) || p->weight_decay < 0.0 || p->epochs < 0 || p->batch_size < 1)
        throw BadSpec("train config: rates must be >= 0, epochs >= 0, batch_size >= 1");
    }
    if (classify_backbone_lr < 0.0) throw BadSpec("train config: classify_backbone_lr must be >= 0");
    if (icc_iterations < 1) throw BadSpec("train config: icc_iterations must be >= 1");
    if (!(contrast_lr_decay_after_first > 0.0)) throw BadSpec("train config: lr decay must be positive");
    if (contrast_epochs_after_first < 0) throw BadSpec("train config: contrast_epochs_after_first must be >= 0");
    if (supervised_epochs < 0) throw BadSpec("train config: supervised_epochs must be >= 0");
  }

  int contrast_epochs(int iteration) const {
    return iteration >= 2 && contrast_epochs_after_first > 0 ? contrast_epochs_after_first : contrast.epochs;
  }
  int baseline_epochs() const { return supervised_epochs > 0 ? supervised_epochs : classify_heads.epochs; }

  bool operator==(const TrainConfig&) const = default;
};

/// One line of the training log.
struct EpochLog {
  std::string phase;
  int iteration = 0;
  int epoch = 0;
  double loss = 0.0;
  int batches = 0;
};

using EpochLogger = std::function<void(const EpochLog&)>;

inline nlohmann::json to_json(const EpochLog& e) {
  return {{"phase", e.phase}, {"iteration", e.iteration}, {"epoch", e.epoch}, {"loss", e.loss}, {"batches", e.batches}};
}

/// Everything a training phase needs besides the model.
struct PhaseContext {
  net::BackboneConfig backbone;
  contrast::ContrastConfig contrast;
  data::DownsampleConfig downsample;
  TrainConfig train;
  EpochLogger log;

  /// The configured architecture with its input width taken from the data.
  net::BackboneConfig backbone_for(const data::Dataset& ds) const {
    if (ds.videos.empty()) throw TooFewVideos("dataset has no videos");
    net::BackboneConfig c = backbone;
    c.input_dim = static_cast<int>(ds.videos.front().dim());
    return c;
  }
};

}  // namespace icc::train
