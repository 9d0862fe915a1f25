#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "icc/contrastive/sampling.hpp"
#include "icc/data/types.hpp"

namespace icc::contrast {

/// Flattened anchors of a batch and, per anchor, indices (into `anchors`) of
/// its positive and negative sets.
struct ContrastSets {
  std::vector<SampleIndex> anchors;
  std::vector<int> anchor_labels;
  std::vector<std::vector<int>> positives;
  std::vector<std::vector<int>> negatives;

  std::size_t size() const { return anchors.size(); }
};

/// Frame-level sets over every sampled index (n,i) of a batch:
///   P = same activity, same label, |dt| <= delta
///   N = different activity, or same activity with a different label
/// Same-label pairs farther apart than delta belong to neither set. Without
/// activity labels (or with activity negatives disabled) every pair counts
/// as "same activity".
inline ContrastSets build_sets(const std::vector<std::vector<SampleIndex>>& samples,
                               const std::vector<const std::vector<int>*>& labels,
                               const std::vector<std::optional<int>>& activities, const ContrastConfig& config) {
  if (samples.size() != labels.size() || samples.size() != activities.size())
    throw InvalidArgument("build_sets: per-video inputs differ in length");
  ContrastSets sets;
  std::vector<int> activity_of;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    for (const auto& s : samples[n]) {
      if (s.frame < 0 || s.frame >= static_cast<Index>(labels[n]->size()))
        throw MissingLabels("sample frame " + std::to_string(s.frame) + " has no label");
      sets.anchors.push_back(s);
      sets.anchor_labels.push_back((*labels[n])[static_cast<std::size_t>(s.frame)]);
      activity_of.push_back(activities[n] ? *activities[n] : -1);
    }
  }
  const std::size_t total = sets.anchors.size();
  sets.positives.assign(total, {});
  sets.negatives.assign(total, {});
  for (std::size_t a = 0; a < total; ++a) {
    for (std::size_t b = 0; b < total; ++b) {
      if (a == b) continue;
      const bool same_activity = !config.use_activity_negatives || activity_of[a] < 0 || activity_of[b] < 0 ||
                                 activity_of[a] == activity_of[b];
      if (!same_activity) {
        sets.negatives[a].push_back(static_cast<int>(b));
      } else if (sets.anchor_labels[a] != sets.anchor_labels[b]) {
        sets.negatives[a].push_back(static_cast<int>(b));
      } else if (std::abs(sets.anchors[a].time - sets.anchors[b].time) <= config.delta) {
        sets.positives[a].push_back(static_cast<int>(b));
      }
    }
  }
  return sets;
}

/// Video-level sets: positives share the activity, negatives do not.
inline ContrastSets build_video_sets(const std::vector<std::optional<int>>& activities) {
  ContrastSets sets;
  const std::size_t n = activities.size();
  sets.positives.assign(n, {});
  sets.negatives.assign(n, {});
  for (std::size_t a = 0; a < n; ++a) {
    sets.anchors.push_back({static_cast<int>(a), 0, 0.0, 0});
    sets.anchor_labels.push_back(activities[a] ? *activities[a] : -1);
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b || !activities[a] || !activities[b]) continue;
      (*activities[a] == *activities[b] ? sets.positives[a] : sets.negatives[a]).push_back(static_cast<int>(b));
    }
  }
  return sets;
}

}  // namespace icc::contrast
