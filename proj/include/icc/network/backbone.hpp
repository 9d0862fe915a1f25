#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "icc/core/error.hpp"
#include "icc/core/rng.hpp"
#include "icc/nn/ops.hpp"

namespace icc::net {

inline constexpr int kDecoderLayers = 6;
/// Encoder stages (input block plus five pooled stages).
inline constexpr int kEncoderStages = 6;
/// Inputs shorter than this are edge-padded so five halvings stay meaningful.
inline constexpr Index kMinFrames = 32;

struct BackboneConfig {
  int input_dim = 16;
  int num_decoder_layers = kDecoderLayers;
  /// Width of the first three encoder stages; the last three use half.
  int base_channels = 64;
  std::array<int, kDecoderLayers> latent_dim_per_layer{32, 32, 64, 64, 128, 128};
  int conv_kernel = 3;

  std::array<int, kEncoderStages> encoder_channels() const {
    const int half = std::max(1, base_channels / 2);
    return {base_channels, base_channels, base_channels, half, half, half};
  }
  int latent_dim() const {
    int d = 0;
    for (int v : latent_dim_per_layer) d += v;
    return d;
  }
  void validate() const {
    if (num_decoder_layers != kDecoderLayers) throw BadSpec("the decoder must have exactly six layers");
    if (input_dim < 1 || base_channels < 2 || conv_kernel < 1 || conv_kernel % 2 == 0)
      throw BadSpec("backbone config: invalid input_dim/base_channels/conv_kernel");
    for (int v : latent_dim_per_layer)
      if (v < 1) throw BadSpec("backbone config: latent dims must be positive");
  }

  /// CPU-sized default.
  static BackboneConfig desk(int input_dim) {
    BackboneConfig c;
    c.input_dim = input_dim;
    return c;
  }
  /// Widths of the reference configuration (2048-d I3D input, 256/128
  /// encoder, 128-d decoder layers).
  static BackboneConfig paper_scale(int input_dim = 2048) {
    BackboneConfig c;
    c.input_dim = input_dim;
    c.base_channels = 256;
    c.latent_dim_per_layer = {128, 128, 128, 128, 128, 128};
    return c;
  }

  bool operator==(const BackboneConfig&) const = default;
};

/// conv -> norm -> relu, twice.
struct ConvBlock {
  nn::Var w1, b1, g1, beta1;
  nn::Var w2, b2, g2, beta2;
  int kernel = 3;

  ConvBlock() = default;
  ConvBlock(int in, int out, int kernel_size, Rng& rng) : kernel(kernel_size) {
    w1 = uniform_init(kernel * in, out, kernel * in, rng);
    b1 = uniform_init(1, out, kernel * in, rng);
    g1 = nn::Var(Matrix::Ones(1, out), true);
    beta1 = nn::Var(Matrix::Zero(1, out), true);
    w2 = uniform_init(kernel * out, out, kernel * out, rng);
    b2 = uniform_init(1, out, kernel * out, rng);
    g2 = nn::Var(Matrix::Ones(1, out), true);
    beta2 = nn::Var(Matrix::Zero(1, out), true);
  }

  nn::Var operator()(const nn::Var& x) const {
    auto h = nn::relu(nn::layer_norm(nn::conv1d(x, w1, b1, kernel), g1, beta1));
    return nn::relu(nn::layer_norm(nn::conv1d(h, w2, b2, kernel), g2, beta2));
  }

  std::vector<std::pair<std::string, nn::Var>> named(const std::string& prefix) const {
    return {{prefix + ".conv1.weight", w1}, {prefix + ".conv1.bias", b1},  {prefix + ".norm1.gain", g1},
            {prefix + ".norm1.bias", beta1}, {prefix + ".conv2.weight", w2}, {prefix + ".conv2.bias", b2},
            {prefix + ".norm2.gain", g2},    {prefix + ".norm2.bias", beta2}};
  }

  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static nn::Var uniform_init(Index rows, Index cols, Index fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    return nn::Var(std::move(m), true);
  }
};

/// Outputs z_1..z_6 of the decoder; z[u-1] has ceil(T/2^(6-u)) frames.
struct DecoderFeatures {
  std::array<nn::Var, kDecoderLayers> z;
  Index input_len = 0;  // frames fed to the network (after padding)
  Index valid_len = 0;  // frames of real data; the rest is edge padding

  std::array<Index, kDecoderLayers> lengths() const {
    std::array<Index, kDecoderLayers> out{};
    for (int u = 0; u < kDecoderLayers; ++u) out[static_cast<std::size_t>(u)] = z[static_cast<std::size_t>(u)].rows();
    return out;
  }
};

/// U-Net shaped temporal encoder-decoder. The encoder halves the temporal
/// resolution five times; the decoder doubles it back, merging the matching
/// encoder stage at every step, and exposes each decoder layer's output.
class Backbone {
 public:
  Backbone() = default;
  Backbone(const BackboneConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const auto enc = config_.encoder_channels();
    const auto& lat = config_.latent_dim_per_layer;
    const int k = config_.conv_kernel;
    encoder_.emplace_back(config_.input_dim, enc[0], k, rng);
    for (int s = 1; s < kEncoderStages; ++s) encoder_.emplace_back(enc[s - 1], enc[s], k, rng);
    decoder_.emplace_back(enc[kEncoderStages - 1], lat[0], k, rng);
    for (int u = 1; u < kDecoderLayers; ++u)
      decoder_.emplace_back(lat[static_cast<std::size_t>(u - 1)] + enc[static_cast<std::size_t>(kEncoderStages - 1 - u)],
                            lat[static_cast<std::size_t>(u)], k, rng);
  }

  const BackboneConfig& config() const { return config_; }

  DecoderFeatures forward(const Matrix& input) const {
    if (input.cols() != config_.input_dim)
      throw ShapeError("input has " + std::to_string(input.cols()) + " feature dims, backbone expects " +
                       std::to_string(config_.input_dim));
    if (input.rows() < 1) throw ShapeError("empty input sequence");
    DecoderFeatures out;
    out.valid_len = input.rows();
    Matrix padded = input;
    if (input.rows() < kMinFrames) {
      padded.resize(kMinFrames, input.cols());
      padded.topRows(input.rows()) = input;
      for (Index t = input.rows(); t < kMinFrames; ++t) padded.row(t) = input.row(input.rows() - 1);
    }
    out.input_len = padded.rows();

    std::array<nn::Var, kEncoderStages> skips;
    nn::Var x(std::move(padded));
    skips[0] = encoder_[0](x);
    for (int s = 1; s < kEncoderStages; ++s) skips[s] = encoder_[s](nn::max_pool2(skips[s - 1]));

    out.z[0] = decoder_[0](skips[kEncoderStages - 1]);
    for (int u = 1; u < kDecoderLayers; ++u) {
      const auto& skip = skips[static_cast<std::size_t>(kEncoderStages - 1 - u)];
      auto up = nn::upsample_nearest(out.z[static_cast<std::size_t>(u - 1)], skip.rows());
      out.z[static_cast<std::size_t>(u)] = decoder_[static_cast<std::size_t>(u)](nn::concat_cols({up, skip}));
    }
    return out;
  }

  std::vector<std::pair<std::string, nn::Var>> named_parameters() const {
    std::vector<std::pair<std::string, nn::Var>> out;
    for (std::size_t i = 0; i < encoder_.size(); ++i) {
      auto p = encoder_[i].named("encoder." + std::to_string(i));
      out.insert(out.end(), p.begin(), p.end());
    }
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
      auto p = decoder_[i].named("decoder." + std::to_string(i));
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  std::vector<nn::Var> parameters() const {
    std::vector<nn::Var> out;
    for (auto& [name, v] : named_parameters()) out.push_back(v);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += static_cast<std::size_t>(p.value().size());
    return n;
  }

  /// Deep copy; the clone shares no parameter storage with this model.
  Backbone clone() const {
    Backbone b;
    b.config_ = config_;
    auto copy_block = [](const ConvBlock& src) {
      ConvBlock dst;
      dst.kernel = src.kernel;
      auto cp = [](const nn::Var& v) { return nn::Var(v.value(), true); };
      dst.w1 = cp(src.w1), dst.b1 = cp(src.b1), dst.g1 = cp(src.g1), dst.beta1 = cp(src.beta1);
      dst.w2 = cp(src.w2), dst.b2 = cp(src.b2), dst.g2 = cp(src.g2), dst.beta2 = cp(src.beta2);
      return dst;
    };
    for (const auto& e : encoder_) b.encoder_.push_back(copy_block(e));
    for (const auto& d : decoder_) b.decoder_.push_back(copy_block(d));
    return b;
  }

 private:
  BackboneConfig config_;
  std::vector<ConvBlock> encoder_;
  std::vector<ConvBlock> decoder_;
};

}  // namespace icc::net
