#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "icc/core/error.hpp"
#include "icc/core/tensor.hpp"

namespace icc::data {

/// Ordered action names (size A) plus optional complex-activity names (size C).
class ActionVocabulary {
 public:
  ActionVocabulary() = default;
  explicit ActionVocabulary(std::vector<std::string> actions, std::vector<std::string> activities = {})
      : actions_(std::move(actions)), activities_(std::move(activities)) {
    if (actions_.empty()) throw BadSpec("vocabulary needs at least one action");
    for (std::size_t i = 0; i < actions_.size(); ++i) {
      if (!action_index_.emplace(actions_[i], static_cast<int>(i)).second)
        throw BadSpec("duplicate action name '" + actions_[i] + "'");
    }
    for (std::size_t i = 0; i < activities_.size(); ++i) activity_index_.emplace(activities_[i], static_cast<int>(i));
  }

  int num_actions() const { return static_cast<int>(actions_.size()); }
  int num_activities() const { return static_cast<int>(activities_.size()); }
  const std::vector<std::string>& actions() const { return actions_; }
  const std::vector<std::string>& activities() const { return activities_; }
  const std::string& action_name(int i) const { return actions_.at(static_cast<std::size_t>(i)); }

  std::optional<int> action(const std::string& name) const {
    auto it = action_index_.find(name);
    if (it == action_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<int> activity(const std::string& name) const {
    auto it = activity_index_.find(name);
    if (it == activity_index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const ActionVocabulary& o) const { return actions_ == o.actions_ && activities_ == o.activities_; }

 private:
  std::vector<std::string> actions_;
  std::vector<std::string> activities_;
  std::unordered_map<std::string, int> action_index_;
  std::unordered_map<std::string, int> activity_index_;
};

/// One video's frame-wise input features, T x F.
struct FeatureSequence {
  std::string video_id;
  Matrix data;
  std::optional<int> activity;

  Index length() const { return data.rows(); }
  Index dim() const { return data.cols(); }
};

enum class LabelSource { kGroundTruth, kCluster, kPseudo };

inline const char* to_string(LabelSource s) {
  switch (s) {
    case LabelSource::kGroundTruth: return "ground_truth";
    case LabelSource::kCluster: return "cluster";
    case LabelSource::kPseudo: return "pseudo";
  }
  return "?";
}

struct LabelSequence {
  std::string video_id;
  std::vector<int> labels;
  LabelSource source = LabelSource::kGroundTruth;

  Index length() const { return static_cast<Index>(labels.size()); }
};

/// Checks the length pairing and the label range of a feature/label pair.
inline void check_pair(const FeatureSequence& f, const LabelSequence& l, int num_labels) {
  if (l.length() != f.length())
    throw LengthMismatch("video '" + f.video_id + "': " + std::to_string(l.length()) + " labels for " +
                         std::to_string(f.length()) + " frames");
  for (int v : l.labels)
    if (v < 0 || v >= num_labels) throw BadSpec("label " + std::to_string(v) + " out of range in '" + l.video_id + "'");
}

struct DatasetSplit {
  std::set<std::string> labeled_ids;
  std::set<std::string> unlabeled_ids;
  std::uint64_t seed = 0;

  bool operator==(const DatasetSplit&) const = default;
};

struct DownsampleConfig {
  int w0 = 1;
  bool augment = false;

  int w_min() const { return std::max(1, (w0 + 1) / 2); }
  int w_max() const { return 2 * w0; }
  bool operator==(const DownsampleConfig&) const = default;
};

/// In-memory dataset: features, optional ground truth, vocabulary, splits.
struct Dataset {
  ActionVocabulary vocab;
  std::vector<FeatureSequence> videos;
  std::vector<std::optional<LabelSequence>> ground_truth;
  std::vector<std::string> train_ids;  // D_L union D_U
  std::vector<std::string> test_ids;
  DatasetSplit split;

  std::optional<std::size_t> find(const std::string& id) const {
    for (std::size_t i = 0; i < videos.size(); ++i)
      if (videos[i].video_id == id) return i;
    return std::nullopt;
  }
  std::size_t index_of(const std::string& id) const {
    auto i = find(id);
    if (!i) throw InvalidArgument("unknown video id '" + id + "'");
    return *i;
  }
  const FeatureSequence& video(const std::string& id) const { return videos[index_of(id)]; }
  const LabelSequence& truth(const std::string& id) const {
    const auto& gt = ground_truth[index_of(id)];
    if (!gt) throw MissingLabels("no ground truth for '" + id + "'");
    return *gt;
  }
  bool has_activities() const {
    return vocab.num_activities() > 0 &&
           std::all_of(videos.begin(), videos.end(), [](const auto& v) { return v.activity.has_value(); });
  }
};

}  // namespace icc::data
