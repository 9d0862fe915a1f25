#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <utility>
#include <vector>

#include "icc/core/rng.hpp"
#include "icc/data/types.hpp"

namespace icc::data {

/// Majority label of each length-w window; ties go to the smallest label.
inline std::vector<int> downsample_labels(const std::vector<int>& labels, int w) {
  if (w < 1) throw InvalidArgument("downsample window must be >= 1");
  const std::size_t len = labels.size();
  const std::size_t out_len = (len + static_cast<std::size_t>(w) - 1) / static_cast<std::size_t>(w);
  std::vector<int> out(out_len);
  std::vector<int> window;
  for (std::size_t t = 0; t < out_len; ++t) {
    const std::size_t a = t * static_cast<std::size_t>(w);
    const std::size_t b = std::min(a + static_cast<std::size_t>(w), len);
    window.assign(labels.begin() + static_cast<std::ptrdiff_t>(a), labels.begin() + static_cast<std::ptrdiff_t>(b));
    std::sort(window.begin(), window.end());
    int best = window.front(), best_count = 0;
    for (std::size_t i = 0; i < window.size();) {
      std::size_t j = i;
      while (j < window.size() && window[j] == window[i]) ++j;
      if (static_cast<int>(j - i) > best_count) {
        best = window[i];
        best_count = static_cast<int>(j - i);
      }
      i = j;
    }
    out[t] = best;
  }
  return out;
}

/// Element-wise max over consecutive windows of w frames; the final partial
/// window is kept, so the output has ceil(T/w) frames.
inline Matrix downsample_features(const Matrix& data, int w) {
  if (w < 1) throw InvalidArgument("downsample window must be >= 1");
  const Index len = data.rows();
  const Index out_len = (len + w - 1) / w;
  Matrix out(out_len, data.cols());
  for (Index t = 0; t < out_len; ++t) {
    const Index a = t * w;
    const Index n = std::min<Index>(w, len - a);
    out.row(t) = data.middleRows(a, n).colwise().maxCoeff();
  }
  return out;
}

inline std::pair<FeatureSequence, std::optional<LabelSequence>> downsample(const FeatureSequence& features,
                                                                           const std::optional<LabelSequence>& labels,
                                                                           int w) {
  if (labels && labels->length() != features.length())
    throw LengthMismatch("video '" + features.video_id + "': labels and features differ in length");
  FeatureSequence f{features.video_id, downsample_features(features.data, w), features.activity};
  std::optional<LabelSequence> l;
  if (labels) l = LabelSequence{labels->video_id, downsample_labels(labels->labels, w), labels->source};
  return {std::move(f), std::move(l)};
}

/// Expands a per-window label sequence back to `length` frames.
inline std::vector<int> expand_labels(const std::vector<int>& labels, int w, Index length) {
  std::vector<int> out(static_cast<std::size_t>(length));
  for (Index t = 0; t < length; ++t)
    out[static_cast<std::size_t>(t)] = labels[std::min(labels.size() - 1, static_cast<std::size_t>(t / w))];
  return out;
}

/// Training-time window for temporal feature augmentation.
inline int sample_augment_window(const DownsampleConfig& config, Rng& rng) {
  if (!config.augment) return config.w0;
  return static_cast<int>(rng.uniform_int(config.w_min(), config.w_max()));
}

/// Random labeled/unlabeled split. |labeled| = max(min_labeled, round(fraction*N)).
/// Warns on stderr when the labeled videos do not cover every action.
inline DatasetSplit make_split(std::vector<std::string> video_ids, double labeled_fraction, std::uint64_t seed,
                               int min_labeled = 1) {
  if (video_ids.empty()) throw TooFewVideos("no videos to split");
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0)) throw InvalidArgument("labeled fraction must be in (0,1]");
  const int n = static_cast<int>(video_ids.size());
  if (min_labeled > n)
    throw TooFewVideos("min_labeled=" + std::to_string(min_labeled) + " exceeds " + std::to_string(n) + " videos");
  const int count = std::min(n, std::max(min_labeled, static_cast<int>(std::lround(labeled_fraction * n))));
  std::sort(video_ids.begin(), video_ids.end());
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(video_ids.begin(), video_ids.end(), rng.engine());
  DatasetSplit split;
  split.seed = seed;
  split.labeled_ids.insert(video_ids.begin(), video_ids.begin() + count);
  split.unlabeled_ids.insert(video_ids.begin() + count, video_ids.end());
  return split;
}

/// Actions never seen in the labeled videos of `ds`; used for the coverage warning.
inline std::vector<int> missing_actions(const Dataset& ds, const DatasetSplit& split) {
  std::vector<bool> seen(static_cast<std::size_t>(ds.vocab.num_actions()), false);
  for (const auto& id : split.labeled_ids) {
    auto i = ds.find(id);
    if (!i || !ds.ground_truth[*i]) continue;
    for (int l : ds.ground_truth[*i]->labels) seen[static_cast<std::size_t>(l)] = true;
  }
  std::vector<int> missing;
  for (std::size_t a = 0; a < seen.size(); ++a)
    if (!seen[a]) missing.push_back(static_cast<int>(a));
  return missing;
}

inline void warn_if_actions_missing(const Dataset& ds, const DatasetSplit& split, std::ostream& log = std::cerr) {
  const auto missing = missing_actions(ds, split);
  if (missing.empty()) return;
  log << "warning: labeled videos miss " << missing.size() << " action(s):";
  for (int a : missing) log << ' ' << ds.vocab.action_name(a);
  log << '\n';
}

}  // namespace icc::data
