#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "icc/core/rng.hpp"
#include "icc/data/types.hpp"

namespace icc::contrast {

struct KMeansResult {
  Matrix centroids;
  std::vector<int> assignment;  // per pooled point
  double inertia = 0.0;
  int iterations = 0;
};

namespace detail {

inline void assign(const Matrix& points, const Matrix& centroids, std::vector<int>& assignment, Vector& dist2) {
  // ||x||^2 - 2 x.c + ||c||^2, ties to the lowest cluster id
  const Vector cn = centroids.rowwise().squaredNorm();
  const Matrix cross = points * centroids.transpose();
  for (Index i = 0; i < points.rows(); ++i) {
    const double pn = points.row(i).squaredNorm();
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < centroids.rows(); ++c) {
      const double d = std::max(0.0, pn - 2.0 * cross(i, c) + cn(c));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best;
    dist2(i) = best_d;
  }
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding. Stops after `max_iter` rounds or
/// when the relative change in inertia drops below `tol`. A cluster that
/// empties out is reseeded at the point farthest from its centroid.
inline KMeansResult kmeans(const Matrix& points, int k, Rng& rng, int max_iter = 100, double tol = 1e-4) {
  const Index n = points.rows();
  if (k < 1 || n < k) throw TooFewFrames(std::to_string(n) + " points for " + std::to_string(k) + " clusters");
  KMeansResult r;
  r.centroids.resize(k, points.cols());
  // k-means++ seeding
  Vector d2 = Vector::Constant(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  Index first = static_cast<Index>(rng.uniform_int(0, n - 1));
  r.centroids.row(0) = points.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  for (int c = 1; c < k; ++c) {
    d2 = d2.cwiseMin((points.rowwise() - r.centroids.row(c - 1)).rowwise().squaredNorm());
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target < 0.0 && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
      if (pick < 0)
        for (Index i = n - 1; i >= 0; --i)
          if (d2(i) > 0.0) {
            pick = i;
            break;
          }
    } else {
      // every point coincides with a centroid: take any unchosen point
      for (Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
    }
    chosen[static_cast<std::size_t>(pick)] = true;
    r.centroids.row(c) = points.row(pick);
  }

  r.assignment.assign(static_cast<std::size_t>(n), 0);
  Vector dist(n);
  double prev = std::numeric_limits<double>::infinity();
  for (r.iterations = 1; r.iterations <= max_iter; ++r.iterations) {
    detail::assign(points, r.centroids, r.assignment, dist);
    // update, reseeding empties
    Matrix sums = Matrix::Zero(k, points.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.row(r.assignment[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(r.assignment[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        r.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      Index far = 0;
      dist.maxCoeff(&far);
      r.centroids.row(c) = points.row(far);
      const int old = r.assignment[static_cast<std::size_t>(far)];
      --counts[static_cast<std::size_t>(old)];
      r.assignment[static_cast<std::size_t>(far)] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      dist(far) = 0.0;
    }
    detail::assign(points, r.centroids, r.assignment, dist);
    r.inertia = dist.sum();
    const bool converged = r.inertia == 0.0 || (std::isfinite(prev) && std::abs(prev - r.inertia) <= tol * prev);
    prev = r.inertia;
    if (converged) break;
  }
  r.iterations = std::min(r.iterations, max_iter);
  return r;
}

/// Clusters the pooled frames of a whole mini-batch (not per video) and maps
/// the ids back to one cluster-label sequence per input.
inline std::vector<data::LabelSequence> cluster_batch(const std::vector<data::FeatureSequence>& inputs, int k, Rng& rng,
                                                      double* inertia = nullptr) {
  Index total = 0;
  for (const auto& v : inputs) total += v.length();
  if (inputs.empty() || total < k)
    throw TooFewFrames("batch has " + std::to_string(total) + " frames, need at least " + std::to_string(k));
  Matrix pooled(total, inputs.front().dim());
  Index row = 0;
  for (const auto& v : inputs) {
    pooled.middleRows(row, v.length()) = v.data;
    row += v.length();
  }
  const auto km = kmeans(pooled, k, rng);
  if (inertia) *inertia = km.inertia;
  std::vector<data::LabelSequence> out;
  row = 0;
  for (const auto& v : inputs) {
    data::LabelSequence ls{v.video_id, {}, data::LabelSource::kCluster};
    ls.labels.assign(km.assignment.begin() + row, km.assignment.begin() + row + v.length());
    row += v.length();
    out.push_back(std::move(ls));
  }
  return out;
}

/// Diagnostic dump: "video_id,frame,cluster".
inline void write_cluster_csv(const std::filesystem::path& path, const std::vector<data::LabelSequence>& clusters) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "video_id,frame,cluster\n";
  for (const auto& ls : clusters)
    for (std::size_t t = 0; t < ls.labels.size(); ++t) out << ls.video_id << ',' << t << ',' << ls.labels[t] << '\n';
}

}  // namespace icc::contrast
