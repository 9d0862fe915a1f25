#pragma once

#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "icc/data/types.hpp"
#include "icc/network/multires.hpp"

namespace icc::net {

/// Per-decoder-layer linear classifiers G_u with ensemble weights alpha_u.
struct ClassifierHeads {
  std::array<nn::Var, kDecoderLayers> weight;
  std::array<nn::Var, kDecoderLayers> bias;
  std::array<double, kDecoderLayers> alpha{};
  int num_actions = 0;

  ClassifierHeads() { alpha.fill(1.0 / kDecoderLayers); }

  ClassifierHeads(const BackboneConfig& config, int actions, Rng& rng) : num_actions(actions) {
    alpha.fill(1.0 / kDecoderLayers);
    for (int u = 0; u < kDecoderLayers; ++u) {
      const int in = config.latent_dim_per_layer[static_cast<std::size_t>(u)];
      weight[static_cast<std::size_t>(u)] = ConvBlock::uniform_init(in, actions, in, rng);
      bias[static_cast<std::size_t>(u)] = ConvBlock::uniform_init(1, actions, in, rng);
    }
  }

  void set_alpha(const std::array<double, kDecoderLayers>& a) {
    double sum = 0.0;
    for (double v : a) {
      if (v < 0.0) throw BadSpec("ensemble weights must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw BadSpec("ensemble weights must sum to 1");
    alpha = a;
  }

  std::vector<std::pair<std::string, nn::Var>> named_parameters() const {
    std::vector<std::pair<std::string, nn::Var>> out;
    for (int u = 0; u < kDecoderLayers; ++u) {
      out.emplace_back("heads." + std::to_string(u) + ".weight", weight[static_cast<std::size_t>(u)]);
      out.emplace_back("heads." + std::to_string(u) + ".bias", bias[static_cast<std::size_t>(u)]);
    }
    return out;
  }
  std::vector<nn::Var> parameters() const {
    std::vector<nn::Var> out;
    for (auto& [n, v] : named_parameters()) out.push_back(v);
    return out;
  }
};

struct EnsemblePrediction {
  nn::Var probabilities;  // target_len x A
  data::LabelSequence labels;
};

/// Ties go to the smallest action index.
inline std::vector<int> argmax_rows(const Matrix& p) {
  std::vector<int> out(static_cast<std::size_t>(p.rows()));
  for (Index t = 0; t < p.rows(); ++t) {
    Index best = 0;
    for (Index a = 1; a < p.cols(); ++a)
      if (p(t, a) > p(t, best)) best = a;
    out[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  return out;
}

/// p[t] = sum_u alpha_u * up(softmax(G_u z_u))[t]. Each layer's
/// probabilities are linearly interpolated to the network input length, the
/// padding is cropped, and the result is interpolated to `target_len` when
/// that differs from the valid length.
inline EnsemblePrediction predict_ensemble(const DecoderFeatures& dec, const ClassifierHeads& heads, Index target_len) {
  std::vector<nn::Var> per_layer;
  std::vector<double> weights;
  for (int u = 0; u < kDecoderLayers; ++u) {
    const auto i = static_cast<std::size_t>(u);
    auto p = nn::softmax_rows(nn::linear(dec.z[i], heads.weight[i], heads.bias[i]));
    per_layer.push_back(p.rows() == dec.input_len ? p : nn::upsample_linear(p, dec.input_len));
    weights.push_back(heads.alpha[i]);
  }
  auto probs = nn::weighted_sum(per_layer, weights);
  if (dec.valid_len != dec.input_len) {
    std::vector<Index> keep(static_cast<std::size_t>(dec.valid_len));
    std::iota(keep.begin(), keep.end(), Index{0});
    probs = nn::gather_rows(probs, std::move(keep));
  }
  if (target_len != probs.rows()) probs = nn::upsample_linear(probs, target_len);
  EnsemblePrediction out;
  out.labels.labels = argmax_rows(probs.value());
  out.labels.source = data::LabelSource::kPseudo;
  out.probabilities = std::move(probs);
  return out;
}

}  // namespace icc::net
