#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "icc/data/io.hpp"
#include "icc/data/synth.hpp"
#include "icc/data/transforms.hpp"
#include "icc/metrics/segments.hpp"
#include "icc/network/probe.hpp"
#include "support.hpp"

namespace icc::data {
namespace {

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p, std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';
}

TEST(FeatureFile, ShapeRoundTrip) {
  const auto dir = test::scratch_dir("feat_roundtrip");
  Matrix m(4, 2);
  m << 1, 2, 3, 4, 5, 6, 7, 8;
  save_feature_file(dir / "a.bin", m);
  const auto seq = load_feature_sequence(dir / "a.bin", "a", 1);
  EXPECT_EQ(seq.length(), 4);
  EXPECT_EQ(seq.dim(), 2);
  EXPECT_EQ(seq.data, m);
  EXPECT_EQ(seq.activity, 1);
  EXPECT_EQ(std::filesystem::file_size(dir / "a.bin"), 8u + 16u + 8u * 4u);
}

TEST(FeatureFile, LayoutIsLittleEndianWithMagic) {
  Matrix m(1, 1);
  m << 1.0;
  const auto bytes = encode_feature_file(m);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), std::string(kFeatureMagic, 8));
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 1u);
  // 1.0f = 0x3f800000
  EXPECT_EQ(static_cast<unsigned char>(bytes[26]), 0x80u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[27]), 0x3fu);
}

TEST(FeatureFile, SizeMismatchIsMalformed) {
  const auto dir = test::scratch_dir("feat_bad");
  Matrix m = Matrix::Ones(4, 2);
  auto bytes = encode_feature_file(m);
  write_bytes(dir / "short.bin", std::string(bytes.begin(), bytes.end() - 4));
  EXPECT_THROW(load_feature_sequence(dir / "short.bin", "x"), MalformedFile);
  write_bytes(dir / "junk.bin", "not a feature file at all");
  EXPECT_THROW(load_feature_sequence(dir / "junk.bin", "x"), MalformedFile);
}

TEST(FeatureFile, NanIsNonFinite) {
  const auto dir = test::scratch_dir("feat_nan");
  Matrix m = Matrix::Ones(4, 2);
  m(2, 1) = std::numeric_limits<double>::quiet_NaN();
  auto bytes = encode_feature_file(m);
  write_bytes(dir / "nan.bin", std::string(bytes.begin(), bytes.end()));
  EXPECT_THROW(load_feature_sequence(dir / "nan.bin", "x"), NonFiniteData);
}

TEST(Labels, MapThroughVocabulary) {
  const auto dir = test::scratch_dir("labels");
  ActionVocabulary vocab({"pour", "stir"});
  write_lines(dir / "a.txt", {"pour", "pour", "stir"});
  const auto l = load_labels(dir / "a.txt", vocab, "a");
  EXPECT_EQ(l.labels, (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(l.source, LabelSource::kGroundTruth);
}

TEST(Labels, EmptyFileFailsAtPairing) {
  const auto dir = test::scratch_dir("labels_empty");
  ActionVocabulary vocab({"pour", "stir"});
  write_lines(dir / "e.txt", {});
  const auto l = load_labels(dir / "e.txt", vocab, "e");
  EXPECT_TRUE(l.labels.empty());
  FeatureSequence f{"e", Matrix::Ones(3, 2), std::nullopt};
  EXPECT_THROW(check_pair(f, l, vocab.num_actions()), LengthMismatch);
}

TEST(Labels, UnknownAction) {
  const auto dir = test::scratch_dir("labels_unknown");
  ActionVocabulary vocab({"pour", "stir"});
  write_lines(dir / "u.txt", {"pour", "fly"});
  EXPECT_THROW(load_labels(dir / "u.txt", vocab), UnknownAction);
}

TEST(Vocabulary, RejectsDuplicatesAndEmpty) {
  EXPECT_THROW(ActionVocabulary({"a", "a"}), BadSpec);
  EXPECT_THROW(ActionVocabulary(std::vector<std::string>{}), BadSpec);
}

TEST(Mapping, RoundTripAndContiguity) {
  const auto dir = test::scratch_dir("mapping");
  save_mapping(dir / "m.txt", {"x", "y", "z"});
  EXPECT_EQ(load_mapping(dir / "m.txt"), (std::vector<std::string>{"x", "y", "z"}));
  write_lines(dir / "gap.txt", {"0 x", "2 y"});
  EXPECT_THROW(load_mapping(dir / "gap.txt"), MalformedFile);
}

TEST(Downsample, MaxPoolsFeatures) {
  Matrix x(4, 1);
  x << 1, 3, 2, 0;
  Matrix expect(2, 1);
  expect << 3, 2;
  EXPECT_EQ(downsample_features(x, 2), expect);
}

TEST(Downsample, MajorityLabel) {
  EXPECT_EQ(downsample_labels({0, 0, 1, 1, 1, 2}, 3), (std::vector<int>{0, 1}));
  EXPECT_EQ(downsample_labels({1, 0, 0, 1}, 4), (std::vector<int>{0}));  // tie -> smallest
}

TEST(Downsample, LengthMismatch) {
  FeatureSequence f{"v", Matrix::Ones(4, 1), std::nullopt};
  LabelSequence l{"v", {0, 1, 0}, LabelSource::kGroundTruth};
  EXPECT_THROW(downsample(f, l, 2), LengthMismatch);
}

TEST(Downsample, PropertiesAgainstBruteForce) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Index T = rng.uniform_int(1, 64);
    const int w = static_cast<int>(rng.uniform_int(1, 9));
    const Matrix x = test::random_matrix(T, 3, rng);
    const auto labels = test::random_labels(static_cast<std::size_t>(T), 4, rng);
    const Matrix y = downsample_features(x, w);
    const auto ly = downsample_labels(labels, w);
    const Index out_len = (T + w - 1) / w;
    ASSERT_EQ(y.rows(), out_len);
    ASSERT_EQ(static_cast<Index>(ly.size()), out_len);
    for (Index t = 0; t < out_len; ++t) {
      std::map<int, int> tally;
      for (Index c = 0; c < 3; ++c) {
        double m = -std::numeric_limits<double>::infinity();
        for (Index s = t * w; s < std::min<Index>(t * w + w, T); ++s) m = std::max(m, x(s, c));
        ASSERT_EQ(y(t, c), m);
      }
      for (Index s = t * w; s < std::min<Index>(t * w + w, T); ++s) ++tally[labels[static_cast<std::size_t>(s)]];
      int best = -1, count = -1;
      for (auto [l, n] : tally)
        if (n > count) best = l, count = n;
      ASSERT_EQ(ly[static_cast<std::size_t>(t)], best);
    }
    if (w == 1) {
      ASSERT_EQ(y, x);
      ASSERT_EQ(ly, labels);
    }
  }
}

TEST(AugmentWindow, OffReturnsBaseWindow) {
  Rng rng(1);
  EXPECT_EQ(sample_augment_window({4, false}, rng), 4);
}

TEST(AugmentWindow, UniformOverRange) {
  Rng rng(2);
  const DownsampleConfig cfg{4, true};
  EXPECT_EQ(cfg.w_min(), 2);
  EXPECT_EQ(cfg.w_max(), 8);
  std::map<int, int> counts;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[sample_augment_window(cfg, rng)];
  ASSERT_EQ(counts.size(), 7u);
  const double p = 1.0 / 7.0;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (auto [w, n] : counts) {
    EXPECT_GE(w, 2);
    EXPECT_LE(w, 8);
    EXPECT_LT(std::abs(n - draws * p), 3 * sigma) << "w=" << w;
  }
  Rng r1(3);
  for (int i = 0; i < 1000; ++i) {
    const int w = sample_augment_window({1, true}, r1);
    EXPECT_TRUE(w == 1 || w == 2);
  }
}

std::vector<std::string> ids(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("v" + std::to_string(i));
  return out;
}

TEST(Split, SizesFollowFractionAndMinimum) {
  const auto s = make_split(ids(50), 0.10, 3, 5);
  EXPECT_EQ(s.labeled_ids.size(), 5u);
  EXPECT_EQ(s.unlabeled_ids.size(), 45u);
  const auto all = make_split(ids(10), 1.0, 3);
  EXPECT_EQ(all.labeled_ids.size(), 10u);
  EXPECT_TRUE(all.unlabeled_ids.empty());
  EXPECT_EQ(make_split(ids(10), 0.05, 3, 4).labeled_ids.size(), 4u);
  EXPECT_THROW(make_split(ids(3), 0.5, 3, 4), TooFewVideos);
}

TEST(Split, PureFunctionOfInputs) {
  auto shuffled = ids(30);
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(make_split(ids(30), 0.2, 9), make_split(shuffled, 0.2, 9));
  EXPECT_NE(make_split(ids(30), 0.2, 9), make_split(ids(30), 0.2, 10));
  const auto s = make_split(ids(30), 0.3, 1);
  for (const auto& id : s.labeled_ids) EXPECT_FALSE(s.unlabeled_ids.count(id));
  EXPECT_EQ(s.labeled_ids.size() + s.unlabeled_ids.size(), 30u);
}

TEST(Synth, NoiselessFramesEqualPrototypes) {
  auto spec = test::tiny_spec();
  spec.noise_scale = 0.0;
  const auto out = synth_generate(spec);
  std::vector<int> pred, gt;
  for (std::size_t v = 0; v < out.features.size(); ++v) {
    const auto& x = out.features[v].data;
    for (Index t = 0; t < x.rows(); ++t) {
      const int l = out.labels[v].labels[static_cast<std::size_t>(t)];
      ASSERT_LT((x.row(t) - out.prototypes.row(l)).norm(), 1e-6);
      Index best;
      (out.prototypes.rowwise() - x.row(t)).rowwise().squaredNorm().minCoeff(&best);
      pred.push_back(static_cast<int>(best));
      gt.push_back(l);
    }
  }
  EXPECT_EQ(metrics::mof(pred, gt), 100.0);
}

TEST(Synth, Deterministic) {
  const auto a = synth_generate(test::tiny_spec());
  const auto b = synth_generate(test::tiny_spec());
  ASSERT_EQ(a.features.size(), b.features.size());
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    EXPECT_EQ(a.features[i].data, b.features[i].data);
    EXPECT_EQ(a.labels[i].labels, b.labels[i].labels);
  }
}

TEST(Synth, ConsecutiveSegmentsDiffer) {
  auto spec = test::tiny_spec();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    spec.seed = seed;
    for (const auto& l : synth_generate(spec).labels) {
      const auto segs = metrics::segments(l.labels);
      EXPECT_GE(segs.size(), 2u);
      for (std::size_t i = 1; i < segs.size(); ++i) EXPECT_NE(segs[i].label, segs[i - 1].label);
    }
  }
}

TEST(Synth, PrototypesAtRequestedDistance) {
  auto spec = test::tiny_spec();
  spec.prototype_distance = 4.0;
  const auto out = synth_generate(spec);
  for (Index a = 0; a < out.prototypes.rows(); ++a)
    for (Index b = a + 1; b < out.prototypes.rows(); ++b)
      EXPECT_NEAR((out.prototypes.row(a) - out.prototypes.row(b)).norm(), 4.0, 1e-9);
}

TEST(Synth, RejectsBadSpec) {
  auto spec = test::tiny_spec();
  spec.num_actions = 1;
  EXPECT_THROW(synth_generate(spec), BadSpec);
  spec = test::tiny_spec();
  spec.frame_dim = 2;
  EXPECT_THROW(synth_generate(spec), BadSpec);
}

TEST(Synth, SeparatedPrototypesGiveLinearlyDecodableRawFeatures) {
  SynthSpec spec;
  spec.num_activities = 0;
  spec.num_actions = 4;
  spec.videos_per_activity = 5;
  spec.frame_dim = 16;
  spec.noise_scale = 0.5;
  spec.prototype_distance = 4.0;
  const auto out = synth_generate(spec);
  std::vector<Matrix> xs;
  std::vector<std::vector<int>> ys;
  for (std::size_t v = 0; v + 1 < out.features.size(); ++v) {
    xs.push_back(out.features[v].data);
    ys.push_back(out.labels[v].labels);
  }
  const auto probe = net::probe_train(xs, ys, 4, {});
  EXPECT_GE(metrics::mof(probe.predict(out.features.back().data), out.labels.back().labels), 95.0);
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto dir = test::scratch_dir("dataset");
  const auto ds = synth_dataset(test::tiny_spec(), {0.25, 0.5, 1, 3});
  save_dataset(dir, ds);
  const auto back = load_dataset(dir);
  EXPECT_EQ(back.vocab, ds.vocab);
  EXPECT_EQ(back.train_ids, ds.train_ids);
  EXPECT_EQ(back.test_ids, ds.test_ids);
  EXPECT_EQ(back.split.labeled_ids, ds.split.labeled_ids);
  for (const auto& v : ds.videos) {
    EXPECT_EQ(back.video(v.video_id).data, v.data);
    EXPECT_EQ(back.video(v.video_id).activity, v.activity);
    EXPECT_EQ(back.truth(v.video_id).labels, ds.truth(v.video_id).labels);
  }
  EXPECT_THROW(load_dataset(dir / "missing"), IoError);
}

TEST(Dataset, SynthSplitIsPerActivityAndDisjoint) {
  const auto ds = synth_dataset(test::tiny_spec(), {0.25, 0.5, 1, 3});
  EXPECT_EQ(ds.test_ids.size(), 2u);
  std::set<std::string> train(ds.train_ids.begin(), ds.train_ids.end());
  std::map<int, int> per_activity;
  for (const auto& id : ds.test_ids) {
    EXPECT_FALSE(train.count(id));
    ++per_activity[*ds.video(id).activity];
  }
  EXPECT_EQ(per_activity.size(), 2u);
  EXPECT_EQ(ds.split.labeled_ids.size() + ds.split.unlabeled_ids.size(), ds.train_ids.size());
}

TEST(Dataset, MissingActionWarning) {
  auto ds = synth_dataset(test::tiny_spec(), {0.25, 0.1, 1, 3});
  std::ostringstream log;
  DatasetSplit none;
  warn_if_actions_missing(ds, none, log);
  EXPECT_NE(log.str().find("miss 4 action"), std::string::npos);
}

}  // namespace
}  // namespace icc::data
