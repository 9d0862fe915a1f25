#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "icc/core/error.hpp"
#include "icc/core/rng.hpp"
#include "icc/core/tensor.hpp"

namespace icc::contrast {

struct ContrastConfig {
  /// Partitions per video; 2K samples are drawn.
  int K = 20;
  /// Offset of the partner samples in normalized time; <= 0 means 1/(3K).
  double epsilon = 0.0;
  /// Temporal proximity threshold (normalized time, inclusive).
  double delta = 0.5;
  double tau = 0.1;
  /// k-means clusters; <= 0 means 2A.
  int num_clusters = 0;
  bool use_video_level = true;
  bool use_activity_negatives = true;

  double effective_epsilon() const { return epsilon > 0.0 ? epsilon : 1.0 / (3.0 * K); }
  int effective_clusters(int num_actions) const { return num_clusters > 0 ? num_clusters : 2 * num_actions; }

  void validate() const {
    if (K < 1) throw BadSpec("K must be >= 1");
    const double eps = effective_epsilon();
    if (!(eps > 0.0 && eps < 1.0 / K)) throw BadSpec("epsilon must lie in (0, 1/K)");
    if (!(delta > 0.0 && delta <= 1.0)) throw BadSpec("delta must lie in (0, 1]");
    if (!(tau > 0.0)) throw BadSpec("tau must be positive");
  }

  bool operator==(const ContrastConfig&) const = default;
};

/// One sampled frame: video n, sample i, normalized time t in [0,1].
struct SampleIndex {
  int video = 0;
  int sample = 0;
  double time = 0.0;
  Index frame = 0;

  bool operator==(const SampleIndex&) const = default;
};

inline Index time_to_frame(double t, Index video_len) {
  return std::clamp<Index>(static_cast<Index>(std::lround(t * static_cast<double>(video_len - 1))), 0, video_len - 1);
}

/// Draws 2K samples: one uniformly inside each of the K equal partitions of
/// [0,1], then for each of those a partner at distance in (0, epsilon] with a
/// random sign, clamped to [0,1]. Partners may cross partition boundaries.
inline std::vector<SampleIndex> sample_frames(Index video_len, const ContrastConfig& config, Rng& rng, int video = 0) {
  if (config.K < 1) throw BadSpec("K must be >= 1");
  if (video_len < 1) throw InvalidArgument("sample_frames: empty video");
  const double eps = config.effective_epsilon();
  std::vector<SampleIndex> out;
  out.reserve(static_cast<std::size_t>(2 * config.K));
  for (int k = 0; k < config.K; ++k) {
    const double lo = static_cast<double>(k) / config.K;
    const double hi = static_cast<double>(k + 1) / config.K;
    const double t = std::min(rng.uniform(lo, hi), 1.0);
    out.push_back({video, k, t, time_to_frame(t, video_len)});
  }
  for (int k = 0; k < config.K; ++k) {
    // magnitude in (0, eps]
    const double mag = eps * (1.0 - rng.uniform());
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double t = std::clamp(out[static_cast<std::size_t>(k)].time + sign * mag, 0.0, 1.0);
    out.push_back({video, config.K + k, t, time_to_frame(t, video_len)});
  }
  return out;
}

}  // namespace icc::contrast
