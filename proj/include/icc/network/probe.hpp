#pragma once

#include <cmath>
#include <vector>

#include "icc/core/error.hpp"
#include "icc/core/tensor.hpp"
#include "icc/network/heads.hpp"

namespace icc::net {

struct ProbeConfig {
  int epochs = 300;
  double lr = 0.02;
  double weight_decay = 0.0;

  bool operator==(const ProbeConfig&) const = default;
};

/// A single affine map d -> A followed by softmax; no hidden layer.
struct LinearProbe {
  Matrix weight;  // d x A
  RowVector bias;  // A

  bool empty() const { return weight.size() == 0; }

  Matrix logits(const Matrix& x) const {
    Matrix out = x * weight;
    out.rowwise() += bias;
    return out;
  }
  std::vector<int> predict(const Matrix& x) const { return argmax_rows(logits(x)); }
};

/// Fits the probe with full-batch Adam on mean frame-wise cross-entropy,
/// starting from zero weights. Deterministic for fixed inputs.
inline LinearProbe probe_train(const std::vector<Matrix>& features, const std::vector<std::vector<int>>& labels,
                               int num_actions, const ProbeConfig& config = {}) {
  if (features.empty() || features.size() != labels.size()) throw InvalidArgument("probe_train: empty or mismatched inputs");
  Index total = 0;
  const Index dim = features.front().cols();
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].rows() != static_cast<Index>(labels[i].size()))
      throw LengthMismatch("probe_train: features/labels length mismatch in sequence " + std::to_string(i));
    if (features[i].cols() != dim) throw ShapeError("probe_train: inconsistent feature dimension");
    total += features[i].rows();
  }
  Matrix x(total, dim);
  Matrix onehot = Matrix::Zero(total, num_actions);
  Index row = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    x.middleRows(row, features[i].rows()) = features[i];
    for (std::size_t t = 0; t < labels[i].size(); ++t) {
      const int l = labels[i][t];
      if (l < 0 || l >= num_actions) throw BadSpec("probe_train: label out of range");
      onehot(row + static_cast<Index>(t), l) = 1.0;
    }
    row += features[i].rows();
  }

  LinearProbe probe{Matrix::Zero(dim, num_actions), RowVector::Zero(num_actions)};
  Matrix mw = Matrix::Zero(dim, num_actions), vw = mw;
  RowVector mb = RowVector::Zero(num_actions), vb = mb;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Matrix p = nn::softmax_rows(probe.logits(x));
    Matrix d = (p - onehot) / static_cast<double>(total);
    Matrix gw = x.transpose() * d;
    RowVector gb = d.colwise().sum();
    const double c1 = 1.0 - std::pow(b1, epoch), c2 = 1.0 - std::pow(b2, epoch);
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw.cwiseAbs2();
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb.cwiseAbs2();
    if (config.weight_decay > 0.0) probe.weight *= (1.0 - config.lr * config.weight_decay);
    probe.weight.array() -= config.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
    probe.bias.array() -= config.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
  return probe;
}

}  // namespace icc::net
