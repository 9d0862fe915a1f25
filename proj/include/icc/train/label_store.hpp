#pragma once

#include <map>
#include <string>
#include <vector>

#include "icc/data/types.hpp"

namespace icc::train {

/// Frame labels used to build contrast sets, one sequence per training
/// video at the original frame rate. Ground-truth entries are immutable.
class LabelStore {
 public:
  LabelStore() = default;

  /// Seeds the store with the ground truth of every labeled video.
  static LabelStore from_dataset(const data::Dataset& ds) {
    LabelStore s;
    for (const auto& id : ds.split.labeled_ids) {
      auto gt = ds.truth(id);
      gt.source = data::LabelSource::kGroundTruth;
      s.entries_[id] = std::move(gt);
    }
    return s;
  }

  bool contains(const std::string& id) const { return entries_.count(id) > 0; }
  bool is_ground_truth(const std::string& id) const {
    auto it = entries_.find(id);
    return it != entries_.end() && it->second.source == data::LabelSource::kGroundTruth;
  }

  const data::LabelSequence& at(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw MissingLabels("no labels stored for '" + id + "'");
    return it->second;
  }

  void set_ground_truth(data::LabelSequence labels) {
    labels.source = data::LabelSource::kGroundTruth;
    entries_[labels.video_id] = std::move(labels);
  }

  /// Stores cluster or pseudo labels. Refuses to overwrite ground truth.
  void set(data::LabelSequence labels) {
    if (labels.source == data::LabelSource::kGroundTruth)
      throw InvalidArgument("use set_ground_truth for ground-truth labels");
    if (is_ground_truth(labels.video_id))
      throw InvalidArgument("refusing to overwrite ground truth of '" + labels.video_id + "'");
    entries_[labels.video_id] = std::move(labels);
  }

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, data::LabelSequence>& entries() const { return entries_; }

 private:
  std::map<std::string, data::LabelSequence> entries_;
};

}  // namespace icc::train
