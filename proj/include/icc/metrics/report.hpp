#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "icc/metrics/segments.hpp"

namespace icc::metrics {

inline constexpr std::array<int, 3> kF1Thresholds = {10, 25, 50};

enum class Aggregation { kFramePooled, kVideoMean };

inline const char* to_string(Aggregation a) { return a == Aggregation::kFramePooled ? "frame_pooled" : "video_mean"; }

struct VideoScores {
  std::string video_id;
  long frames = 0;
  long correct = 0;
  double mof = 0.0;
  double edit = 0.0;
  std::map<int, double> f1;
};

struct MetricReport {
  double mof = 0.0;
  double edit = 0.0;
  std::map<int, double> f1;
  std::vector<VideoScores> per_video;
  /// Pooling used for MoF; Edit and F1 are always averaged per video.
  Aggregation aggregation = Aggregation::kFramePooled;

  double f1_at(int threshold) const { return f1.at(threshold); }
  bool operator==(const MetricReport& o) const {
    return mof == o.mof && edit == o.edit && f1 == o.f1 && aggregation == o.aggregation;
  }
};

inline VideoScores score_video(const std::string& id, std::span<const int> pred, std::span<const int> gt) {
  VideoScores v;
  v.video_id = id;
  v.mof = mof(pred, gt);
  v.frames = static_cast<long>(gt.size());
  for (std::size_t t = 0; t < gt.size(); ++t) v.correct += pred[t] == gt[t];
  v.edit = edit_score(pred, gt);
  for (int thr : kF1Thresholds) v.f1[thr] = f1_at(pred, gt, thr).f1;
  return v;
}

inline MetricReport aggregate(std::vector<VideoScores> videos, Aggregation mof_mode = Aggregation::kFramePooled) {
  if (videos.empty()) throw EmptySequence("no videos to aggregate");
  MetricReport r;
  r.aggregation = mof_mode;
  long frames = 0, correct = 0;
  for (const auto& v : videos) {
    frames += v.frames;
    correct += v.correct;
    r.edit += v.edit;
    r.mof += v.mof;
    for (const auto& [thr, val] : v.f1) r.f1[thr] += val;
  }
  const double n = static_cast<double>(videos.size());
  r.mof = mof_mode == Aggregation::kFramePooled ? 100.0 * static_cast<double>(correct) / static_cast<double>(frames)
                                                : r.mof / n;
  r.edit /= n;
  for (auto& [thr, val] : r.f1) val /= n;
  r.per_video = std::move(videos);
  return r;
}

/// Scores parallel lists of predicted and ground-truth label sequences.
inline MetricReport evaluate(const std::vector<std::string>& ids, const std::vector<std::vector<int>>& preds,
                             const std::vector<std::vector<int>>& gts,
                             Aggregation mof_mode = Aggregation::kFramePooled) {
  if (ids.size() != preds.size() || ids.size() != gts.size())
    throw InvalidArgument("evaluate: ids, predictions and ground truth differ in count");
  std::vector<VideoScores> videos;
  for (std::size_t i = 0; i < ids.size(); ++i) videos.push_back(score_video(ids[i], preds[i], gts[i]));
  return aggregate(std::move(videos), mof_mode);
}

inline std::string format_value(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

inline const char* kReportHeader = "mof,edit,f1_10,f1_25,f1_50";

inline std::string report_row(const MetricReport& r) {
  return format_value(r.mof) + ',' + format_value(r.edit) + ',' + format_value(r.f1.at(10)) + ',' +
         format_value(r.f1.at(25)) + ',' + format_value(r.f1.at(50));
}

inline void write_report_csv(const std::filesystem::path& path, const MetricReport& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << kReportHeader << '\n' << report_row(r) << '\n';
}

inline void write_per_video_csv(const std::filesystem::path& path, const MetricReport& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "video_id,frames,mof,edit,f1_10,f1_25,f1_50\n";
  for (const auto& v : r.per_video)
    out << v.video_id << ',' << v.frames << ',' << format_value(v.mof) << ',' << format_value(v.edit) << ','
        << format_value(v.f1.at(10)) << ',' << format_value(v.f1.at(25)) << ',' << format_value(v.f1.at(50)) << '\n';
}

inline void print_report(std::ostream& os, const MetricReport& r, const std::string& title = "") {
  if (!title.empty()) os << title << '\n';
  os << std::left << std::setw(8) << "MoF" << std::setw(8) << "Edit" << std::setw(8) << "F1@10" << std::setw(8)
     << "F1@25" << "F1@50" << '\n';
  os << std::fixed << std::setprecision(1) << std::setw(8) << r.mof << std::setw(8) << r.edit << std::setw(8)
     << r.f1.at(10) << std::setw(8) << r.f1.at(25) << r.f1.at(50) << '\n';
  os.unsetf(std::ios::floatfield);
}

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Sample mean and standard deviation (n - 1 denominator; 0 for a single run).
inline MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - m) * (x - m);
  return {m, xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0};
}

/// "mean ± std" for each metric across runs with different seeds.
inline std::string deviation_summary(const std::vector<MetricReport>& runs) {
  std::vector<double> mofs, edits;
  std::map<int, std::vector<double>> f1s;
  for (const auto& r : runs) {
    mofs.push_back(r.mof);
    edits.push_back(r.edit);
    for (const auto& [thr, v] : r.f1) f1s[thr].push_back(v);
  }
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  auto put = [&](const std::string& name, const std::vector<double>& xs) {
    const auto s = mean_std(xs);
    os << name << ' ' << s.mean << " ± " << s.stddev << '\n';
  };
  put("MoF", mofs);
  put("Edit", edits);
  for (const auto& [thr, xs] : f1s) put("F1@" + std::to_string(thr), xs);
  return os.str();
}

}  // namespace icc::metrics
