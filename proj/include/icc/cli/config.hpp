#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "icc/data/io.hpp"
#include "icc/data/synth.hpp"
#include "icc/network/checkpoint.hpp"
#include "icc/train/config.hpp"
#include "json.hpp"

namespace icc::cli {

inline constexpr const char* kOutputRootEnv = "ICC_OUTPUT_ROOT";

struct SplitConfig {
  double test_fraction = 0.25;
  double labeled_fraction = 0.1;
  int min_labeled = 1;
  /// Redraw the labeled/unlabeled split of a dataset loaded from disk.
  bool resplit = false;

  bool operator==(const SplitConfig&) const = default;
};

/// Complete description of a run. Serialized next to every run's outputs.
struct RunConfig {
  /// Dataset directory; empty means "generate from `synth`".
  std::string data_dir;
  data::SynthSpec synth;
  SplitConfig split;
  net::BackboneConfig backbone;
  contrast::ContrastConfig contrast;
  data::DownsampleConfig downsample;
  train::TrainConfig train;
  std::string output_dir;
  std::uint64_t seed = 7;

  bool operator==(const RunConfig&) const = default;

  /// Propagates the root seed into the sub-configs that consume it.
  void apply_seed() { train.seed = seed; }

  void validate() const {
    backbone.validate();
    contrast.validate();
    train.validate();
    if (downsample.w0 < 1) throw BadSpec("downsample.w0 must be >= 1");
    if (!(split.labeled_fraction > 0.0 && split.labeled_fraction <= 1.0))
      throw BadSpec("split.labeled_fraction must lie in (0, 1]");
    if (!(split.test_fraction >= 0.0 && split.test_fraction < 1.0)) throw BadSpec("split.test_fraction must lie in [0, 1)");
  }
};

// ---- JSON -----------------------------------------------------------------

inline const char* to_string(net::UpsampleMode m) { return m == net::UpsampleMode::kNearest ? "nearest" : "linear"; }
inline const char* to_string(net::NormOrder o) { return o == net::NormOrder::kPerBlock ? "per_block" : "after_concat"; }

inline net::UpsampleMode parse_upsample(const std::string& s) {
  if (s == "nearest") return net::UpsampleMode::kNearest;
  if (s == "linear") return net::UpsampleMode::kLinear;
  throw BadSpec("unknown upsample mode '" + s + "'");
}

inline net::NormOrder parse_norm_order(const std::string& s) {
  if (s == "per_block") return net::NormOrder::kPerBlock;
  if (s == "after_concat") return net::NormOrder::kAfterConcat;
  throw BadSpec("unknown normalization order '" + s + "'");
}

inline nlohmann::json phase_json(const train::PhaseConfig& p) {
  return {{"lr", p.lr}, {"weight_decay", p.weight_decay}, {"epochs", p.epochs}, {"batch_size", p.batch_size}};
}

inline train::PhaseConfig phase_from(const nlohmann::json& j) {
  return {j.at("lr").get<double>(), j.at("weight_decay").get<double>(), j.at("epochs").get<int>(),
          j.at("batch_size").get<int>()};
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["data_dir"] = c.data_dir;
  j["output_dir"] = c.output_dir;
  j["seed"] = c.seed;
  const auto& s = c.synth;
  j["synth"] = {{"num_activities", s.num_activities},
                {"num_actions", s.num_actions},
                {"videos_per_activity", s.videos_per_activity},
                {"mean_segments", s.mean_segments},
                {"frame_dim", s.frame_dim},
                {"noise_scale", s.noise_scale},
                {"seed", s.seed},
                {"prototype_distance", s.prototype_distance},
                {"mean_segment_frames", s.mean_segment_frames}};
  j["split"] = {{"test_fraction", c.split.test_fraction},
                {"labeled_fraction", c.split.labeled_fraction},
                {"min_labeled", c.split.min_labeled},
                {"resplit", c.split.resplit}};
  j["backbone"] = {{"base_channels", c.backbone.base_channels},
                   {"latent_dim_per_layer", c.backbone.latent_dim_per_layer},
                   {"conv_kernel", c.backbone.conv_kernel}};
  const auto& k = c.contrast;
  j["contrast"] = {{"K", k.K},
                   {"epsilon", k.epsilon},
                   {"delta", k.delta},
                   {"tau", k.tau},
                   {"num_clusters", k.num_clusters},
                   {"use_video_level", k.use_video_level},
                   {"use_activity_negatives", k.use_activity_negatives}};
  j["downsample"] = {{"w0", c.downsample.w0}, {"augment", c.downsample.augment}};
  const auto& t = c.train;
  j["train"] = {{"contrast", phase_json(t.contrast)},
                {"classify_heads", phase_json(t.classify_heads)},
                {"classify_backbone_lr", t.classify_backbone_lr},
                {"icc_iterations", t.icc_iterations},
                {"contrast_lr_decay_after_first", t.contrast_lr_decay_after_first},
                {"contrast_epochs_after_first", t.contrast_epochs_after_first},
                {"supervised_epochs", t.supervised_epochs},
                {"feature_upsample", to_string(t.feature_upsample)},
                {"feature_norm", to_string(t.feature_norm)},
                {"ensemble_alpha", t.ensemble_alpha},
                {"probe_each_iteration", t.probe_each_iteration},
                {"probe", {{"epochs", t.probe.epochs}, {"lr", t.probe.lr}, {"weight_decay", t.probe.weight_decay}}}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    c.data_dir = j.at("data_dir").get<std::string>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& s = j.at("synth");
    c.synth.num_activities = s.at("num_activities").get<int>();
    c.synth.num_actions = s.at("num_actions").get<int>();
    c.synth.videos_per_activity = s.at("videos_per_activity").get<int>();
    c.synth.mean_segments = s.at("mean_segments").get<int>();
    c.synth.frame_dim = s.at("frame_dim").get<int>();
    c.synth.noise_scale = s.at("noise_scale").get<double>();
    c.synth.seed = s.at("seed").get<std::uint64_t>();
    c.synth.prototype_distance = s.at("prototype_distance").get<double>();
    c.synth.mean_segment_frames = s.at("mean_segment_frames").get<int>();
    const auto& sp = j.at("split");
    c.split.test_fraction = sp.at("test_fraction").get<double>();
    c.split.labeled_fraction = sp.at("labeled_fraction").get<double>();
    c.split.min_labeled = sp.at("min_labeled").get<int>();
    c.split.resplit = sp.at("resplit").get<bool>();
    const auto& b = j.at("backbone");
    c.backbone.base_channels = b.at("base_channels").get<int>();
    c.backbone.latent_dim_per_layer = b.at("latent_dim_per_layer").get<std::array<int, net::kDecoderLayers>>();
    c.backbone.conv_kernel = b.at("conv_kernel").get<int>();
    const auto& k = j.at("contrast");
    c.contrast.K = k.at("K").get<int>();
    c.contrast.epsilon = k.at("epsilon").get<double>();
    c.contrast.delta = k.at("delta").get<double>();
    c.contrast.tau = k.at("tau").get<double>();
    c.contrast.num_clusters = k.at("num_clusters").get<int>();
    c.contrast.use_video_level = k.at("use_video_level").get<bool>();
    c.contrast.use_activity_negatives = k.at("use_activity_negatives").get<bool>();
    c.downsample.w0 = j.at("downsample").at("w0").get<int>();
    c.downsample.augment = j.at("downsample").at("augment").get<bool>();
    const auto& t = j.at("train");
    c.train.contrast = phase_from(t.at("contrast"));
    c.train.classify_heads = phase_from(t.at("classify_heads"));
    c.train.classify_backbone_lr = t.at("classify_backbone_lr").get<double>();
    c.train.icc_iterations = t.at("icc_iterations").get<int>();
    c.train.contrast_lr_decay_after_first = t.at("contrast_lr_decay_after_first").get<double>();
    c.train.contrast_epochs_after_first = t.at("contrast_epochs_after_first").get<int>();
    c.train.supervised_epochs = t.at("supervised_epochs").get<int>();
    c.train.feature_upsample = parse_upsample(t.at("feature_upsample").get<std::string>());
    c.train.feature_norm = parse_norm_order(t.at("feature_norm").get<std::string>());
    c.train.ensemble_alpha = t.at("ensemble_alpha").get<std::array<double, net::kDecoderLayers>>();
    c.train.probe_each_iteration = t.at("probe_each_iteration").get<bool>();
    c.train.probe.epochs = t.at("probe").at("epochs").get<int>();
    c.train.probe.lr = t.at("probe").at("lr").get<double>();
    c.train.probe.weight_decay = t.at("probe").at("weight_decay").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw BadSpec(std::string("config: ") + e.what());
  }
  c.apply_seed();
  return c;
}

namespace detail {

/// Rejects keys absent from the defaults so typos do not pass silently.
inline void check_known_keys(const nlohmann::json& reference, const nlohmann::json& given, const std::string& where) {
  if (!given.is_object()) return;
  if (!reference.is_object()) throw BadSpec("config: '" + where + "' is not an object");
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw BadSpec("config: unknown key '" + path + "'");
    if (value.is_object()) check_known_keys(reference.at(key), value, path);
  }
}

}  // namespace detail

/// Defaults overlaid with a (possibly partial) JSON document.
inline RunConfig merge_config(const RunConfig& base, const nlohmann::json& overlay) {
  auto j = to_json(base);
  detail::check_known_keys(j, overlay, "");
  j.merge_patch(overlay);
  return run_config_from_json(j);
}

inline RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {}) {
  nlohmann::json overlay;
  try {
    overlay = nlohmann::json::parse(data::detail::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedFile(path.string() + ": " + e.what());
  }
  return merge_config(base, overlay);
}

inline void save_config(const std::filesystem::path& path, const RunConfig& c) {
  net::write_file_atomic(path, to_json(c).dump(2) + "\n");
}

/// Relative output directories are placed under $ICC_OUTPUT_ROOT when set.
inline std::filesystem::path resolve_output_dir(const std::string& dir, const std::string& fallback) {
  std::filesystem::path p = dir.empty() ? std::filesystem::path(fallback) : std::filesystem::path(dir);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return std::filesystem::path(root) / p;
  return p;
}

}  // namespace icc::cli
