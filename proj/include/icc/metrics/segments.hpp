#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "icc/core/error.hpp"

namespace icc::metrics {

/// Half-open run [start, end) of a single label.
struct Segment {
  int label = 0;
  long start = 0;
  long end = 0;

  long length() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

inline std::vector<Segment> segments(std::span<const int> labels) {
  if (labels.empty()) throw EmptySequence("cannot segment an empty label sequence");
  std::vector<Segment> out;
  long start = 0;
  for (long t = 1; t <= static_cast<long>(labels.size()); ++t) {
    if (t == static_cast<long>(labels.size()) || labels[static_cast<std::size_t>(t)] != labels[static_cast<std::size_t>(start)]) {
      out.push_back({labels[static_cast<std::size_t>(start)], start, t});
      start = t;
    }
  }
  return out;
}

inline void require_same_length(std::span<const int> pred, std::span<const int> gt) {
  if (pred.empty() || gt.empty()) throw EmptySequence("metric input is empty");
  if (pred.size() != gt.size())
    throw LengthMismatch("prediction has " + std::to_string(pred.size()) + " frames, ground truth " +
                         std::to_string(gt.size()));
}

/// Frame accuracy in percent.
inline double mof(std::span<const int> pred, std::span<const int> gt) {
  require_same_length(pred, gt);
  long hit = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) hit += pred[t] == gt[t];
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pred.size());
}

inline std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Segmental edit score in [0, 100]: normalized Levenshtein distance between
/// the segment label strings.
inline double edit_score(std::span<const int> pred, std::span<const int> gt) {
  if (pred.empty() || gt.empty()) throw EmptySequence("metric input is empty");
  std::vector<int> a, b;
  for (const auto& s : segments(pred)) a.push_back(s.label);
  for (const auto& s : segments(gt)) b.push_back(s.label);
  const double d = static_cast<double>(levenshtein(a, b));
  return std::max(0.0, 100.0 * (1.0 - d / static_cast<double>(std::max(a.size(), b.size()))));
}

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0, fp = 0, fn = 0;
};

/// Segmental F1 at an IoU threshold given in percent. Predicted segments are
/// visited in temporal order; each claims the unmatched same-label ground
/// truth segment with the highest IoU (earliest on ties) if that IoU reaches
/// the threshold. Precision, recall and F1 are returned in percent.
inline F1Score f1_at(std::span<const int> pred, std::span<const int> gt, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 100.0)) throw InvalidArgument("IoU threshold must lie in (0, 100]");
  if (pred.empty() || gt.empty()) throw EmptySequence("metric input is empty");
  const auto ps = segments(pred);
  const auto gs = segments(gt);
  const double thr = iou_threshold / 100.0;
  std::vector<bool> used(gs.size(), false);
  F1Score s;
  for (const auto& p : ps) {
    long best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gs.size(); ++g) {
      if (used[g] || gs[g].label != p.label) continue;
      const long inter = std::max(0L, std::min(p.end, gs[g].end) - std::max(p.start, gs[g].start));
      const long uni = std::max(p.end, gs[g].end) - std::min(p.start, gs[g].start);
      const double iou = static_cast<double>(inter) / static_cast<double>(uni);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<long>(g);
      }
    }
    if (best >= 0 && best_iou >= thr) {
      used[static_cast<std::size_t>(best)] = true;
      ++s.tp;
    } else {
      ++s.fp;
    }
  }
  s.fn = static_cast<long>(gs.size()) - s.tp;
  s.precision = 100.0 * static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
  s.recall = 100.0 * static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

}  // namespace icc::metrics
