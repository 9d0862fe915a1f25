#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "icc/nn/var.hpp"

namespace icc::nn {

struct ParamGroup {
  std::string name;
  std::vector<Var> params;
  double lr = 1e-3;
  double weight_decay = 0.0;
};

/// Adam with decoupled weight decay. Each group has its own learning rate,
/// which is how the classify step fine-tunes the backbone much more slowly
/// than the heads.
class AdamW {
 public:
  explicit AdamW(std::vector<ParamGroup> groups, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto& g : groups_) {
      auto& m = first_.emplace_back();
      auto& v = second_.emplace_back();
      for (auto& p : g.params) {
        m.push_back(Matrix::Zero(p.rows(), p.cols()));
        v.push_back(Matrix::Zero(p.rows(), p.cols()));
      }
    }
  }

  void zero_grad() {
    for (auto& g : groups_)
      for (auto& p : g.params) p.zero_grad();
  }

  void step() {
    ++steps_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
      auto& g = groups_[gi];
      if (g.lr == 0.0) continue;
      for (std::size_t pi = 0; pi < g.params.size(); ++pi) {
        auto& p = g.params[pi];
        if (!p.node()->has_grad()) continue;
        const Matrix& grad = p.grad();
        Matrix& m = first_[gi][pi];
        Matrix& v = second_[gi][pi];
        m = beta1_ * m + (1.0 - beta1_) * grad;
        v = beta2_ * v + (1.0 - beta2_) * grad.cwiseAbs2();
        Matrix& w = p.mutable_value();
        if (g.weight_decay != 0.0) w *= (1.0 - g.lr * g.weight_decay);
        w.array() -= g.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
      }
    }
  }

  const std::vector<ParamGroup>& groups() const { return groups_; }
  double lr(const std::string& group) const {
    for (const auto& g : groups_)
      if (g.name == group) return g.lr;
    return 0.0;
  }
  long steps() const { return steps_; }

 private:
  std::vector<ParamGroup> groups_;
  std::vector<std::vector<Matrix>> first_;
  std::vector<std::vector<Matrix>> second_;
  double beta1_;
  double beta2_;
  double eps_;
  long steps_ = 0;
};

}  // namespace icc::nn
