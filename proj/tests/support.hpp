#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "icc/core/rng.hpp"
#include "icc/core/tensor.hpp"
#include "icc/data/synth.hpp"
#include "icc/nn/var.hpp"

namespace icc::test {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, scale);
  return m;
}

inline std::vector<int> random_labels(std::size_t len, int classes, Rng& rng) {
  std::vector<int> out(len);
  for (auto& v : out) v = static_cast<int>(rng.uniform_int(0, classes - 1));
  return out;
}

/// Piecewise-constant labels with at most `max_segments` runs.
inline std::vector<int> random_segmented(std::size_t len, int classes, int max_segments, Rng& rng) {
  const int segs = static_cast<int>(rng.uniform_int(1, std::min<std::int64_t>(max_segments, static_cast<std::int64_t>(len))));
  std::vector<std::size_t> cuts;
  for (int s = 1; s < segs; ++s) cuts.push_back(static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(len) - 1)));
  std::sort(cuts.begin(), cuts.end());
  std::vector<int> out(len);
  std::size_t c = 0;
  int label = static_cast<int>(rng.uniform_int(0, classes - 1));
  for (std::size_t t = 0; t < len; ++t) {
    while (c < cuts.size() && cuts[c] == t) {
      label = static_cast<int>(rng.uniform_int(0, classes - 1));
      ++c;
    }
    out[t] = label;
  }
  return out;
}

struct GradCheck {
  double max_rel_error = 0.0;
  double norm_rel_error = 0.0;
  std::size_t entries = 0;
};

/// Compares reverse-mode gradients of a scalar function with central finite
/// differences over every entry of every input.
inline GradCheck grad_check(const std::function<nn::Var(const std::vector<nn::Var>&)>& fn, std::vector<nn::Var> inputs,
                            double h = 1e-4, double abs_floor = 1e-7) {
  for (auto& v : inputs) v.zero_grad();
  auto out = fn(inputs);
  nn::backward(out);
  GradCheck r;
  double diff2 = 0.0, ref2 = 0.0;
  for (auto& v : inputs) {
    const Matrix analytic = v.node()->has_grad() ? v.grad() : Matrix::Zero(v.rows(), v.cols());
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        const double orig = v.value()(i, j);
        v.mutable_value()(i, j) = orig + h;
        const double up = fn(inputs).value()(0, 0);
        v.mutable_value()(i, j) = orig - h;
        const double down = fn(inputs).value()(0, 0);
        v.mutable_value()(i, j) = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic(i, j);
        const double err = std::abs(a - numeric);
        if (err > abs_floor) r.max_rel_error = std::max(r.max_rel_error, err / std::max(std::abs(a), std::abs(numeric)));
        diff2 += err * err;
        ref2 += numeric * numeric;
        ++r.entries;
      }
    }
  }
  r.norm_rel_error = ref2 > 0.0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
  return r;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("icc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// A small synthetic setup that trains in seconds.
inline data::SynthSpec tiny_spec() {
  data::SynthSpec s;
  s.num_activities = 2;
  s.num_actions = 4;
  s.videos_per_activity = 4;
  s.mean_segments = 3;
  s.frame_dim = 8;
  s.mean_segment_frames = 24;
  return s;
}

}  // namespace icc::test
