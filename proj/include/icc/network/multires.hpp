#pragma once

#include <vector>

#include "icc/network/backbone.hpp"

namespace icc::net {

enum class UpsampleMode { kNearest, kLinear };

/// Where the unit-norm constraint is applied when forming f.
/// kPerBlock is the representation used for training; kAfterConcat exists for
/// the normalization-order ablation.
enum class NormOrder { kPerBlock, kAfterConcat };

inline constexpr double kNormFloor = 1e-8;

/// Per-frame concatenation of the six upsampled, normalized decoder outputs.
struct MultiResFeature {
  nn::Var f;                     // target_len x d
  std::vector<Index> block_offsets;  // start column of each layer's block, plus d at the end
  UpsampleMode mode = UpsampleMode::kNearest;
  NormOrder order = NormOrder::kPerBlock;
  Index valid_len = 0;

  Index dim() const { return f.cols(); }
  Index length() const { return f.rows(); }
};

inline nn::Var upsample(const nn::Var& x, Index target, UpsampleMode mode) {
  if (x.rows() == target) return x;
  return mode == UpsampleMode::kNearest ? nn::upsample_nearest(x, target) : nn::upsample_linear(x, target);
}

inline MultiResFeature multires_feature(const DecoderFeatures& dec, Index target_len,
                                        UpsampleMode mode = UpsampleMode::kNearest,
                                        NormOrder order = NormOrder::kPerBlock) {
  MultiResFeature out;
  out.mode = mode;
  out.order = order;
  out.valid_len = target_len == dec.input_len
                      ? dec.valid_len
                      : std::max<Index>(1, dec.valid_len * target_len / dec.input_len);
  std::vector<nn::Var> blocks;
  Index offset = 0;
  for (const auto& z : dec.z) {
    auto up = upsample(z, target_len, mode);
    blocks.push_back(order == NormOrder::kPerBlock ? nn::row_normalize(up, kNormFloor) : up);
    out.block_offsets.push_back(offset);
    offset += z.cols();
  }
  out.block_offsets.push_back(offset);
  out.f = nn::concat_cols(blocks);
  if (order == NormOrder::kAfterConcat) out.f = nn::row_normalize(out.f, kNormFloor);
  return out;
}

/// Video-level summary h[j] = max over valid frames of f[t][j].
inline nn::Var video_summary(const MultiResFeature& f) { return nn::colmax(f.f, std::max<Index>(1, f.valid_len)); }

inline double cosine(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b) {
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / std::sqrt(na * nb);
}

}  // namespace icc::net
