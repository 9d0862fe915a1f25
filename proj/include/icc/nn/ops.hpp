#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "icc/core/error.hpp"
#include "icc/nn/var.hpp"

// Differentiable primitives over frame-major matrices (rows = time).

namespace icc::nn {

inline Var add(const Var& a, const Var& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("add: operand shapes differ");
  return make_result(a.value() + b.value(), {a, b}, [](Node& n) {
    n.parents[0]->grad_buffer() += n.grad;
    n.parents[1]->grad_buffer() += n.grad;
  });
}

inline Var scale(const Var& a, double s) {
  return make_result(a.value() * s, {a}, [s](Node& n) { n.parents[0]->grad_buffer() += s * n.grad; });
}

inline Var relu(const Var& x) {
  return make_result(x.value().cwiseMax(0.0), {x}, [](Node& n) {
    auto& g = n.parents[0]->grad_buffer();
    const Matrix& in = n.parents[0]->value;
    g.array() += (in.array() > 0.0).cast<double>() * n.grad.array();
  });
}

/// Same-padded 1-D convolution over time. `weight` is (kernel*in) x out,
/// laid out tap-major: rows [k*in, (k+1)*in) hold tap k (offset k - kernel/2).
inline Var conv1d(const Var& x, const Var& weight, const Var& bias, int kernel) {
  const Index len = x.rows();
  const Index in = x.cols();
  if (weight.rows() != kernel * in) throw ShapeError("conv1d: weight rows do not match kernel*in_channels");
  const int pad = kernel / 2;
  Matrix cols = Matrix::Zero(len, kernel * in);
  for (Index t = 0; t < len; ++t) {
    for (int k = 0; k < kernel; ++k) {
      const Index src = t + k - pad;
      if (src >= 0 && src < len) cols.block(t, k * in, 1, in) = x.value().row(src);
    }
  }
  Matrix out = cols * weight.value();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), {x, weight, bias}, [cols = std::move(cols), kernel, pad, in](Node& n) {
    const Index len = n.grad.rows();
    if (n.parents[1]->requires_grad) n.parents[1]->grad_buffer().noalias() += cols.transpose() * n.grad;
    if (n.parents[2]->requires_grad) n.parents[2]->grad_buffer() += n.grad.colwise().sum();
    if (n.parents[0]->requires_grad) {
      Matrix dcols = n.grad * n.parents[1]->value.transpose();
      auto& gx = n.parents[0]->grad_buffer();
      for (Index t = 0; t < len; ++t) {
        for (int k = 0; k < kernel; ++k) {
          const Index src = t + k - pad;
          if (src >= 0 && src < len) gx.row(src) += dcols.block(t, k * in, 1, in);
        }
      }
    }
  });
}

/// Per-frame normalization across channels with learnable gain and bias (1 x C).
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5) {
  const Index len = x.rows();
  const Index ch = x.cols();
  Matrix xhat(len, ch);
  Vector inv_std(len);
  for (Index t = 0; t < len; ++t) {
    const double mean = x.value().row(t).mean();
    const double var = (x.value().row(t).array() - mean).square().mean();
    inv_std(t) = 1.0 / std::sqrt(var + eps);
    xhat.row(t) = (x.value().row(t).array() - mean) * inv_std(t);
  }
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), {x, gain, bias}, [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
    const Matrix& g = n.grad;
    if (n.parents[1]->requires_grad) n.parents[1]->grad_buffer() += (g.array() * xhat.array()).colwise().sum().matrix();
    if (n.parents[2]->requires_grad) n.parents[2]->grad_buffer() += g.colwise().sum();
    if (n.parents[0]->requires_grad) {
      const Index ch = g.cols();
      Matrix dxhat = (g.array().rowwise() * n.parents[1]->value.row(0).array()).matrix();
      auto& gx = n.parents[0]->grad_buffer();
      for (Index t = 0; t < g.rows(); ++t) {
        const double mean_d = dxhat.row(t).mean();
        const double mean_dx = dxhat.row(t).dot(xhat.row(t)) / static_cast<double>(ch);
        gx.row(t).array() += inv_std(t) * (dxhat.row(t).array() - mean_d - xhat.row(t).array() * mean_dx);
      }
    }
  });
}

/// Temporal max-pool with window and stride 2; a trailing odd frame forms its
/// own window, so the output length is ceil(T/2).
inline Var max_pool2(const Var& x) {
  const Index len = x.rows();
  const Index out_len = (len + 1) / 2;
  const Index ch = x.cols();
  Matrix out(out_len, ch);
  std::vector<Index> argmax(static_cast<std::size_t>(out_len * ch));
  for (Index t = 0; t < out_len; ++t) {
    const Index a = 2 * t;
    const Index b = std::min(a + 1, len - 1);
    for (Index c = 0; c < ch; ++c) {
      const bool take_b = x.value()(b, c) > x.value()(a, c);
      out(t, c) = take_b ? x.value()(b, c) : x.value()(a, c);
      argmax[static_cast<std::size_t>(t * ch + c)] = take_b ? b : a;
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](Node& n) {
    auto& gx = n.parents[0]->grad_buffer();
    const Index ch = n.grad.cols();
    for (Index t = 0; t < n.grad.rows(); ++t)
      for (Index c = 0; c < ch; ++c) gx(argmax[static_cast<std::size_t>(t * ch + c)], c) += n.grad(t, c);
  });
}

/// out[r] = x[index[r]]; backward scatter-adds.
inline Var gather_rows(const Var& x, std::vector<Index> index) {
  Matrix out(static_cast<Index>(index.size()), x.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || index[r] >= x.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Index>(r)) = x.value().row(index[r]);
  }
  return make_result(std::move(out), {x}, [index = std::move(index)](Node& n) {
    auto& gx = n.parents[0]->grad_buffer();
    for (std::size_t r = 0; r < index.size(); ++r) gx.row(index[r]) += n.grad.row(static_cast<Index>(r));
  });
}

/// Source row for nearest upsampling from `len` to `target`: floor(t*len/target).
inline std::vector<Index> nearest_index(Index len, Index target) {
  std::vector<Index> idx(static_cast<std::size_t>(target));
  for (Index t = 0; t < target; ++t) idx[static_cast<std::size_t>(t)] = std::min(len - 1, (t * len) / target);
  return idx;
}

inline Var upsample_nearest(const Var& x, Index target) { return gather_rows(x, nearest_index(x.rows(), target)); }

/// Two-point linear interpolation weights, half-pixel centred
/// (src = (t + 0.5) * len / target - 0.5, clamped to the valid range).
struct LinearTap {
  Index lo;
  Index hi;
  double w_hi;
};

inline std::vector<LinearTap> linear_taps(Index len, Index target) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(target));
  const double ratio = static_cast<double>(len) / static_cast<double>(target);
  for (Index t = 0; t < target; ++t) {
    double src = (static_cast<double>(t) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(len - 1));
    const Index lo = static_cast<Index>(std::floor(src));
    const Index hi = std::min(lo + 1, len - 1);
    taps[static_cast<std::size_t>(t)] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

inline Matrix upsample_linear(const Matrix& x, Index target) {
  const auto taps = linear_taps(x.rows(), target);
  Matrix out(target, x.cols());
  for (Index t = 0; t < target; ++t) {
    const auto& tp = taps[static_cast<std::size_t>(t)];
    out.row(t) = (1.0 - tp.w_hi) * x.row(tp.lo) + tp.w_hi * x.row(tp.hi);
  }
  return out;
}

inline Var upsample_linear(const Var& x, Index target) {
  auto taps = linear_taps(x.rows(), target);
  Matrix out = upsample_linear(x.value(), target);
  return make_result(std::move(out), {x}, [taps = std::move(taps)](Node& n) {
    auto& gx = n.parents[0]->grad_buffer();
    for (std::size_t t = 0; t < taps.size(); ++t) {
      const auto& tp = taps[t];
      gx.row(tp.lo) += (1.0 - tp.w_hi) * n.grad.row(static_cast<Index>(t));
      gx.row(tp.hi) += tp.w_hi * n.grad.row(static_cast<Index>(t));
    }
  });
}

inline Var concat_cols(const std::vector<Var>& parts) {
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    offsets.push_back(off);
    off += p.cols();
  }
  return make_result(std::move(out), parts, [offsets = std::move(offsets)](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = *n.parents[i];
      if (p.requires_grad) p.grad_buffer() += n.grad.middleCols(offsets[i], p.value.cols());
    }
  });
}

inline Var concat_rows(const std::vector<Var>& parts) {
  const Index cols = parts.front().cols();
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    offsets.push_back(off);
    off += p.rows();
  }
  return make_result(std::move(out), parts, [offsets = std::move(offsets)](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = *n.parents[i];
      if (p.requires_grad) p.grad_buffer() += n.grad.middleRows(offsets[i], p.value.rows());
    }
  });
}

/// x W + b with W (in x out) and b (1 x out).
inline Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (x.cols() != weight.rows()) throw ShapeError("linear: input width does not match weight");
  Matrix out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), {x, weight, bias}, [](Node& n) {
    if (n.parents[0]->requires_grad) n.parents[0]->grad_buffer().noalias() += n.grad * n.parents[1]->value.transpose();
    if (n.parents[1]->requires_grad) n.parents[1]->grad_buffer().noalias() += n.parents[0]->value.transpose() * n.grad;
    if (n.parents[2]->requires_grad) n.parents[2]->grad_buffer() += n.grad.colwise().sum();
  });
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index t = 0; t < logits.rows(); ++t) {
    const double m = logits.row(t).maxCoeff();
    out.row(t) = (logits.row(t).array() - m).exp();
    out.row(t) /= out.row(t).sum();
  }
  return out;
}

inline Var softmax_rows(const Var& x) {
  Matrix p = softmax_rows(x.value());
  return make_result(p, {x}, [p](Node& n) {
    auto& gx = n.parents[0]->grad_buffer();
    for (Index t = 0; t < p.rows(); ++t) {
      const double dot = n.grad.row(t).dot(p.row(t));
      gx.row(t).array() += p.row(t).array() * (n.grad.row(t).array() - dot);
    }
  });
}

/// Sum of w_i * x_i over equally shaped inputs.
inline Var weighted_sum(const std::vector<Var>& xs, const std::vector<double>& weights) {
  Matrix out = Matrix::Zero(xs.front().rows(), xs.front().cols());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].rows() != out.rows() || xs[i].cols() != out.cols()) throw ShapeError("weighted_sum: shapes differ");
    out += weights[i] * xs[i].value();
  }
  return make_result(std::move(out), xs, [weights](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i)
      if (n.parents[i]->requires_grad) n.parents[i]->grad_buffer() += weights[i] * n.grad;
  });
}

/// y[t] = x[t] / (||x[t]|| + floor), row by row.
inline Var row_normalize(const Var& x, double floor = 1e-8) {
  Vector norms = x.value().rowwise().norm();
  Matrix out = x.value();
  for (Index t = 0; t < out.rows(); ++t) out.row(t) /= (norms(t) + floor);
  return make_result(out, {x}, [norms = std::move(norms), out, floor](Node& n) {
    auto& gx = n.parents[0]->grad_buffer();
    for (Index t = 0; t < out.rows(); ++t) {
      const double r = norms(t);
      const double denom = r + floor;
      // d/dx [x/(r+floor)] = I/(r+floor) - x x^T / (r (r+floor)^2)
      gx.row(t) += n.grad.row(t) / denom;
      if (r > 0.0) {
        const double proj = n.grad.row(t).dot(out.row(t));
        gx.row(t) -= proj * out.row(t) / r;
      }
    }
  });
}

/// Column-wise max over the first `rows` rows, returned as 1 x C.
inline Var colmax(const Var& x, Index rows) {
  if (rows < 1 || rows > x.rows()) throw ShapeError("colmax: row count out of range");
  const Index ch = x.cols();
  Matrix out(1, ch);
  std::vector<Index> arg(static_cast<std::size_t>(ch));
  for (Index c = 0; c < ch; ++c) {
    Index best = 0;
    for (Index t = 1; t < rows; ++t)
      if (x.value()(t, c) > x.value()(best, c)) best = t;
    arg[static_cast<std::size_t>(c)] = best;
    out(0, c) = x.value()(best, c);
  }
  return make_result(std::move(out), {x}, [arg = std::move(arg)](Node& n) {
    auto& gx = n.parents[0]->grad_buffer();
    for (std::size_t c = 0; c < arg.size(); ++c)
      gx(arg[c], static_cast<Index>(c)) += n.grad(0, static_cast<Index>(c));
  });
}

/// Mean negative log-probability of the target class over the first
/// `valid` rows of a probability matrix.
inline Var nll_of_probabilities(const Var& probs, std::span<const int> labels, Index valid) {
  constexpr double kFloor = 1e-12;
  if (static_cast<Index>(labels.size()) < valid || valid > probs.rows() || valid < 1)
    throw ShapeError("nll_of_probabilities: label/probability lengths inconsistent");
  double total = 0.0;
  std::vector<int> lab(labels.begin(), labels.begin() + valid);
  for (Index t = 0; t < valid; ++t) total -= std::log(std::max(probs.value()(t, lab[static_cast<std::size_t>(t)]), kFloor));
  Matrix out(1, 1);
  out(0, 0) = total / static_cast<double>(valid);
  return make_result(std::move(out), {probs}, [lab = std::move(lab)](Node& n) {
    auto& gp = n.parents[0]->grad_buffer();
    const double g = n.grad(0, 0) / static_cast<double>(lab.size());
    for (std::size_t t = 0; t < lab.size(); ++t) {
      const double p = n.parents[0]->value(static_cast<Index>(t), lab[t]);
      if (p > kFloor) gp(static_cast<Index>(t), lab[t]) -= g / p;
    }
  });
}

/// Wraps a scalar function with a known analytic gradient.
inline Var scalar_op(const Var& x, double value, Matrix grad_wrt_x) {
  Matrix out(1, 1);
  out(0, 0) = value;
  return make_result(std::move(out), {x}, [g = std::move(grad_wrt_x)](Node& n) {
    n.parents[0]->grad_buffer() += n.grad(0, 0) * g;
  });
}

inline Var constant_scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Var(std::move(m));
}

}  // namespace icc::nn
