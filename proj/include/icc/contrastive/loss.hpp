#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "icc/contrastive/sets.hpp"
#include "icc/nn/ops.hpp"

namespace icc::contrast {

struct LossResult {
  double loss = 0.0;
  /// dLoss/dFeatures, same shape as the input feature matrix.
  Matrix grad;
  int anchors_used = 0;
  /// Anchors with positives but no negatives.
  int anchors_skipped = 0;
  long num_positive_pairs = 0;
  bool skipped = false;
};

/// Mean negative log contrastive probability over all (anchor, positive)
/// pairs:
///   p_ij = e(i,j) / (e(i,j) + sum_{k in N_i} e(i,k)),  e(i,j) = exp(cos(f_i,f_j)/tau)
///   loss = -(1/sum_i |P_i|) sum_i sum_{j in P_i} log p_ij
/// Anchors without positives contribute nothing; anchors with positives but
/// no negatives are skipped and counted. The gradient is exact.
inline LossResult contrastive_nll(const Matrix& features, const ContrastSets& sets, double tau) {
  const Index n = features.rows();
  if (static_cast<std::size_t>(n) != sets.positives.size())
    throw ShapeError("contrastive_nll: feature rows do not match the index set");
  LossResult r;
  r.grad = Matrix::Zero(n, features.cols());

  const Vector norms = features.rowwise().norm();
  Matrix unit = features;
  for (Index i = 0; i < n; ++i) {
    if (norms(i) > 0.0) unit.row(i) /= norms(i);
    else unit.row(i).setZero();
  }
  const Matrix cosine = unit * unit.transpose();
  Matrix dcos = Matrix::Zero(n, n);  // dLoss/dcos(i,j) for anchor i

  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const auto& pos = sets.positives[static_cast<std::size_t>(i)];
    const auto& neg = sets.negatives[static_cast<std::size_t>(i)];
    if (pos.empty()) continue;
    if (neg.empty()) {
      ++r.anchors_skipped;
      continue;
    }
    ++r.anchors_used;
    r.num_positive_pairs += static_cast<long>(pos.size());
    double m = -std::numeric_limits<double>::infinity();
    for (int j : pos) m = std::max(m, cosine(i, j) / tau);
    for (int k : neg) m = std::max(m, cosine(i, k) / tau);
    double neg_sum = 0.0;
    for (int k : neg) neg_sum += std::exp(cosine(i, k) / tau - m);
    double neg_weight = 0.0;  // sum_j 1/denominator_j
    for (int j : pos) {
      const double sj = cosine(i, j) / tau - m;
      const double ej = std::exp(sj);
      const double denom = ej + neg_sum;
      total += std::log(denom) - sj;
      dcos(i, j) += (ej / denom - 1.0) / tau;
      neg_weight += 1.0 / denom;
    }
    for (int k : neg) dcos(i, k) += neg_weight * std::exp(cosine(i, k) / tau - m) / tau;
  }
  if (r.num_positive_pairs == 0) {
    r.skipped = true;
    return r;
  }
  const double inv = 1.0 / static_cast<double>(r.num_positive_pairs);
  r.loss = total * inv;
  dcos *= inv;
  // cos(i,j) = u_i . u_j ; u_i = f_i / |f_i|
  const Matrix dunit = (dcos + dcos.transpose()) * unit;
  for (Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) continue;
    const double radial = dunit.row(i).dot(unit.row(i));
    r.grad.row(i) = (dunit.row(i) - radial * unit.row(i)) / norms(i);
  }
  return r;
}

/// Frame-level term over the sampled representations of a batch.
inline LossResult frame_contrast_loss(const Matrix& samples, const ContrastSets& sets, double tau) {
  auto r = contrastive_nll(samples, sets, tau);
  if (r.skipped) throw NoValidAnchors("no anchor has both positives and negatives");
  return r;
}

/// Video-level term over max-pooled summaries. Returns 0 with `skipped` set
/// when fewer than two activities are present or no video has a positive.
inline LossResult video_contrast_loss(const Matrix& summaries, const std::vector<std::optional<int>>& activities,
                                      double tau) {
  std::set<int> distinct;
  for (const auto& a : activities)
    if (a) distinct.insert(*a);
  if (distinct.size() < 2) {
    LossResult r;
    r.grad = Matrix::Zero(summaries.rows(), summaries.cols());
    r.skipped = true;
    return r;
  }
  return contrastive_nll(summaries, build_video_sets(activities), tau);
}

/// Unweighted sum of the video- and frame-level terms.
inline double total_contrast_loss(double frame_loss, double video_loss) { return frame_loss + video_loss; }

/// Tape versions used during training.
inline nn::Var frame_contrast_loss(const nn::Var& samples, const ContrastSets& sets, double tau, LossResult* info = nullptr) {
  auto r = frame_contrast_loss(samples.value(), sets, tau);
  auto out = nn::scalar_op(samples, r.loss, r.grad);
  if (info) *info = std::move(r);
  return out;
}

inline nn::Var video_contrast_loss(const nn::Var& summaries, const std::vector<std::optional<int>>& activities,
                                   double tau, LossResult* info = nullptr) {
  auto r = video_contrast_loss(summaries.value(), activities, tau);
  auto out = nn::scalar_op(summaries, r.loss, r.grad);
  if (info) *info = std::move(r);
  return out;
}

}  // namespace icc::contrast
