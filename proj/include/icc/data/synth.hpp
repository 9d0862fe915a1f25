#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "icc/core/rng.hpp"
#include "icc/data/transforms.hpp"
#include "icc/data/types.hpp"

namespace icc::data {

/// Parameters of the synthetic stand-in for pre-extracted video features.
struct SynthSpec {
  int num_activities = 4;
  int num_actions = 6;
  int videos_per_activity = 12;
  int mean_segments = 6;
  int frame_dim = 16;
  double noise_scale = 0.5;
  std::uint64_t seed = 7;
  /// Pairwise Euclidean distance between action prototypes.
  double prototype_distance = 1.0;
  /// Mean segment duration in frames.
  int mean_segment_frames = 128;

  bool operator==(const SynthSpec&) const = default;
};

struct SynthOutput {
  std::vector<FeatureSequence> features;
  std::vector<LabelSequence> labels;
  ActionVocabulary vocab;
  Matrix prototypes;  // A x F
};

namespace detail {

inline void validate(const SynthSpec& s) {
  if (s.num_actions < 2) throw BadSpec("num_actions must be >= 2");
  if (s.frame_dim < s.num_actions) throw BadSpec("frame_dim must be >= num_actions");
  if (s.num_activities < 0) throw BadSpec("num_activities must be >= 0");
  if (s.videos_per_activity < 1) throw BadSpec("videos_per_activity must be >= 1");
  if (s.mean_segments < 1) throw BadSpec("mean_segments must be >= 1");
  if (s.mean_segment_frames < 1) throw BadSpec("mean_segment_frames must be >= 1");
  if (!(s.noise_scale >= 0.0) || !(s.prototype_distance > 0.0)) throw BadSpec("noise_scale/prototype_distance invalid");
}

/// A random orthonormal frame scaled so every pair of prototypes sits at
/// exactly `distance`.
inline Matrix make_prototypes(int actions, int dim, double distance, Rng& rng) {
  Matrix g(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  Matrix protos(actions, dim);
  const double r = distance / std::sqrt(2.0);
  for (int a = 0; a < actions; ++a) protos.row(a) = r * q.col(a).transpose();
  return protos;
}

}  // namespace detail

/// Generates videos as chains of action segments. Each complex activity owns
/// a scripted subset of actions; videos follow the script with occasional
/// adjacent swaps. Frames are the action prototype plus isotropic noise,
/// rounded to float32 so in-memory data equals what the feature files hold.
inline SynthOutput synth_generate(const SynthSpec& spec) {
  detail::validate(spec);
  Rng root(spec.seed);
  Rng proto_rng = root.child("prototypes");
  SynthOutput out;
  out.prototypes = detail::make_prototypes(spec.num_actions, spec.frame_dim, spec.prototype_distance, proto_rng);

  std::vector<std::string> actions, activities;
  for (int a = 0; a < spec.num_actions; ++a) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "action_%02d", a);
    actions.emplace_back(buf);
  }
  for (int c = 0; c < spec.num_activities; ++c) activities.push_back("activity_" + std::to_string(c));
  out.vocab = ActionVocabulary(actions, activities);

  // Per-activity scripts. Without activities every video uses all actions.
  const int groups = std::max(1, spec.num_activities);
  const int script_len = spec.num_activities > 0
                             ? std::clamp(static_cast<int>(std::lround(spec.num_actions * 2.0 / 3.0)), 2, spec.num_actions)
                             : spec.num_actions;
  std::vector<std::vector<int>> scripts(static_cast<std::size_t>(groups));
  Rng script_rng = root.child("scripts");
  for (auto& script : scripts) {
    std::vector<int> all(static_cast<std::size_t>(spec.num_actions));
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), script_rng.engine());
    script.assign(all.begin(), all.begin() + script_len);
  }

  const double p_stop = 1.0 / static_cast<double>(spec.mean_segment_frames);
  const int min_frames = std::max(2, spec.mean_segment_frames / 4);
  for (int c = 0; c < groups; ++c) {
    const auto& script = scripts[static_cast<std::size_t>(c)];
    for (int k = 0; k < spec.videos_per_activity; ++k) {
      Rng vrng = root.child("video", static_cast<std::uint64_t>(c * spec.videos_per_activity + k));
      // segment label chain
      std::vector<int> order = script;
      for (std::size_t i = 0; i + 1 < order.size(); ++i)
        if (vrng.uniform() < 0.25) std::swap(order[i], order[i + 1]);
      const int n_segments =
          std::max(2, static_cast<int>(vrng.uniform_int(spec.mean_segments - spec.mean_segments / 3,
                                                        spec.mean_segments + spec.mean_segments / 3)));
      std::vector<int> chain;
      for (int s = 0; static_cast<int>(chain.size()) < n_segments; ++s) {
        int next = order[static_cast<std::size_t>(s) % order.size()];
        if (!chain.empty() && chain.back() == next) continue;
        chain.push_back(next);
      }
      std::vector<int> frame_labels;
      for (int label : chain) {
        std::geometric_distribution<int> geo(p_stop);
        const int dur = std::max(min_frames, geo(vrng.engine()) + 1);
        frame_labels.insert(frame_labels.end(), static_cast<std::size_t>(dur), label);
      }
      const Index len = static_cast<Index>(frame_labels.size());
      Matrix data(len, spec.frame_dim);
      for (Index t = 0; t < len; ++t) {
        data.row(t) = out.prototypes.row(frame_labels[static_cast<std::size_t>(t)]);
        for (Index d = 0; d < spec.frame_dim; ++d)
          data(t, d) = static_cast<double>(static_cast<float>(data(t, d) + spec.noise_scale * vrng.normal()));
      }
      char id[48];
      std::snprintf(id, sizeof id, "vid_a%d_%03d", c, k);
      std::optional<int> act;
      if (spec.num_activities > 0) act = c;
      out.features.push_back({id, std::move(data), act});
      out.labels.push_back({id, std::move(frame_labels), LabelSource::kGroundTruth});
    }
  }
  return out;
}

/// Split parameters for building a complete synthetic dataset.
struct SplitSpec {
  double test_fraction = 0.25;
  double labeled_fraction = 0.1;
  int min_labeled = 1;
  std::uint64_t seed = 7;

  bool operator==(const SplitSpec&) const = default;
};

/// Test videos are taken per activity (every activity keeps the same share),
/// then the remaining training videos are split into labeled/unlabeled.
inline Dataset synth_dataset(const SynthSpec& spec, const SplitSpec& split) {
  auto gen = synth_generate(spec);
  Dataset ds;
  ds.vocab = gen.vocab;
  const int groups = std::max(1, spec.num_activities);
  const int per = spec.videos_per_activity;
  const int n_test = std::clamp(static_cast<int>(std::lround(split.test_fraction * per)), 0, per - 1);
  Rng rng(derive_seed(split.seed, "test-split"));
  for (int c = 0; c < groups; ++c) {
    std::vector<int> idx(static_cast<std::size_t>(per));
    std::iota(idx.begin(), idx.end(), c * per);
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    std::sort(idx.begin(), idx.begin() + n_test);
    std::sort(idx.begin() + n_test, idx.end());
    for (int i = 0; i < per; ++i) {
      const auto& id = gen.features[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])].video_id;
      (i < n_test ? ds.test_ids : ds.train_ids).push_back(id);
    }
  }
  for (std::size_t i = 0; i < gen.features.size(); ++i) {
    ds.videos.push_back(std::move(gen.features[i]));
    ds.ground_truth.emplace_back(std::move(gen.labels[i]));
  }
  ds.split = make_split(ds.train_ids, split.labeled_fraction, split.seed, split.min_labeled);
  // canonical order: labeled first, then unlabeled (matches load_dataset)
  ds.train_ids.assign(ds.split.labeled_ids.begin(), ds.split.labeled_ids.end());
  ds.train_ids.insert(ds.train_ids.end(), ds.split.unlabeled_ids.begin(), ds.split.unlabeled_ids.end());
  return ds;
}

}  // namespace icc::data
