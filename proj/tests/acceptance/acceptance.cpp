// Acceptance run: prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Optional argv[1]: output directory for the CSVs.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "../oracles.hpp"
#include "../support.hpp"
#include "icc/contrastive/loss.hpp"
#include "icc/contrastive/sampling.hpp"
#include "icc/data/synth.hpp"
#include "icc/metrics/report.hpp"
#include "icc/network/multires.hpp"
#include "icc/train/icc.hpp"

namespace {

using namespace icc;
namespace fs = std::filesystem;

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail, double seconds) {
  std::printf("%s %-28s %s (%.1fs)\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

class Timer {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(2);
  os << std::scientific << v;
  return os.str();
}

net::BackboneConfig probe_backbone(int input_dim) {
  net::BackboneConfig c;
  c.input_dim = input_dim;
  c.base_channels = 16;
  c.latent_dim_per_layer = {4, 6, 8, 8, 12, 16};
  return c;
}

void check_decomposition() {
  Timer timer;
  Rng rng(101);
  long pairs = 0;
  double worst = 0.0;
  for (int pass = 0; pass < 20; ++pass) {
    const Index T = rng.uniform_int(20, 120);
    net::Backbone b(probe_backbone(7), rng);
    const auto dec = b.forward(test::random_matrix(T, 7, rng));
    const auto f = net::multires_feature(dec, T).f.value();
    std::array<Matrix, net::kDecoderLayers> up;
    for (std::size_t u = 0; u < up.size(); ++u) up[u] = nn::upsample_nearest(dec.z[u], T).value();
    for (int k = 0; k < 600; ++k) {
      const Index t = rng.uniform_int(0, T - 1), s = rng.uniform_int(0, T - 1);
      double avg = 0.0;
      for (const auto& z : up) avg += net::cosine(z.row(t), z.row(s)) / net::kDecoderLayers;
      worst = std::max(worst, std::abs(net::cosine(f.row(t), f.row(s)) - avg));
      ++pairs;
    }
  }
  report("cosine-decomposition", pairs >= 10000 && worst < 1e-6,
         std::to_string(pairs) + " pairs, max error " + sci(worst), timer.seconds());
}

void check_continuity() {
  Timer timer;
  Rng rng(102);
  long checked = 0, violations = 0;
  double min_margin = 1e9;
  for (int pass = 0; pass < 10; ++pass) {
    net::Backbone b(probe_backbone(5), rng);
    const auto dec = b.forward(test::random_matrix(64, 5, rng));
    const auto f = net::multires_feature(dec, 64, net::UpsampleMode::kNearest).f.value();
    for (int u = 0; u <= 5; ++u)
      for (Index t = 0; t < 64; ++t)
        for (Index s = 0; s < 64; ++s) {
          if ((t >> u) != (s >> u)) continue;
          const double margin = net::cosine(f.row(t), f.row(s)) - (1.0 - u / 3.0);
          if (u > 0) min_margin = std::min(min_margin, margin);
          violations += margin < -1e-12;
          ++checked;
        }
  }
  report("continuity-bound", violations == 0,
         std::to_string(checked) + " pairs, " + std::to_string(violations) + " violations, min margin (u>0) " + fmt(min_margin, 4),
         timer.seconds());
}

void check_gradients() {
  Timer timer;
  Rng rng(103);
  int frame_configs = 0, video_configs = 0;
  double worst = 0.0, worst_norm = 0.0;
  auto track = [&](const test::GradCheck& g) {
    worst = std::max(worst, g.max_rel_error);
    worst_norm = std::max(worst_norm, g.norm_rel_error);
  };
  for (int trial = 0; frame_configs < 25 && trial < 500; ++trial) {
    contrast::ContrastConfig cfg;
    cfg.K = static_cast<int>(rng.uniform_int(2, 5));
    cfg.delta = rng.uniform(0.2, 1.0);
    const int videos = static_cast<int>(rng.uniform_int(2, 4));
    std::vector<std::vector<int>> labels;
    std::vector<std::vector<contrast::SampleIndex>> samples;
    std::vector<std::optional<int>> acts;
    for (int n = 0; n < videos; ++n) {
      labels.push_back(test::random_segmented(40, 3, 4, rng));
      samples.push_back(contrast::sample_frames(40, cfg, rng, n));
      acts.push_back(static_cast<int>(rng.uniform_int(0, 1)));
    }
    std::vector<const std::vector<int>*> ptrs;
    for (auto& l : labels) ptrs.push_back(&l);
    const auto sets = contrast::build_sets(samples, ptrs, acts, cfg);
    const Matrix x = test::random_matrix(static_cast<Index>(sets.size()), 6, rng);
    if (contrast::contrastive_nll(x, sets, 0.1).skipped) continue;
    const double tau = rng.uniform(0.05, 1.0);
    auto fn = [&](const std::vector<nn::Var>& v) { return contrast::frame_contrast_loss(v[0], sets, tau); };
    track(test::grad_check(fn, {nn::Var(x, true)}));
    ++frame_configs;
  }
  for (; video_configs < 25; ++video_configs) {
    const int n = static_cast<int>(rng.uniform_int(3, 8));
    std::vector<std::optional<int>> acts;
    for (int i = 0; i < n; ++i) acts.push_back(i < 2 ? 0 : static_cast<int>(rng.uniform_int(0, 2)));
    acts[2] = 1;
    const double tau = rng.uniform(0.05, 1.0);
    auto fn = [&](const std::vector<nn::Var>& v) { return contrast::video_contrast_loss(v[0], acts, tau); };
    track(test::grad_check(fn, {nn::Var(test::random_matrix(n, 5, rng), true)}));
  }
  report("gradient-checks", frame_configs >= 20 && video_configs >= 20 && worst < 1e-4 && worst_norm < 1e-4,
         std::to_string(frame_configs) + " frame + " + std::to_string(video_configs) + " video configs, max entry rel error " +
             sci(worst) + ", max norm rel error " + sci(worst_norm),
         timer.seconds());
}

void check_metric_oracles() {
  Timer timer;
  Rng rng(104);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto T = static_cast<std::size_t>(rng.uniform_int(1, 64));
    const int A = static_cast<int>(rng.uniform_int(1, 4));
    const auto pred = test::random_segmented(T, A, 12, rng);
    const auto gt = test::random_segmented(T, A, 12, rng);
    bool ok = metrics::mof(pred, gt) == oracle::mof(pred, gt) && metrics::edit_score(pred, gt) == oracle::edit(pred, gt);
    for (int thr : metrics::kF1Thresholds) {
      const auto s = metrics::f1_at(pred, gt, thr);
      const auto o = oracle::f1(pred, gt, thr);
      ok = ok && s.tp == o.tp && s.fp == o.fp && s.fn == o.fn && s.f1 == o.f1;
    }
    mismatches += !ok;
  }
  report("metric-oracles", mismatches == 0, "200 pairs, " + std::to_string(mismatches) + " mismatches", timer.seconds());
}

void check_sets() {
  Timer timer;
  Rng rng(105);
  int mismatches = 0, boundary_pairs = 0, excluded_pairs = 0;
  for (int trial = 0; trial < 500; ++trial) {
    contrast::ContrastConfig cfg;
    // times and delta on a 1/8 grid so |dt| == delta occurs
    cfg.delta = static_cast<double>(rng.uniform_int(1, 8)) / 8.0;
    cfg.use_activity_negatives = rng.uniform() < 0.8;
    const int videos = static_cast<int>(rng.uniform_int(1, 4));
    std::vector<std::vector<int>> labels;
    std::vector<std::vector<contrast::SampleIndex>> samples;
    std::vector<std::optional<int>> acts;
    for (int n = 0; n < videos; ++n) {
      const int len = static_cast<int>(rng.uniform_int(1, 30));
      labels.push_back(test::random_segmented(static_cast<std::size_t>(len), 3, 4, rng));
      std::vector<contrast::SampleIndex> s;
      const int count = static_cast<int>(rng.uniform_int(1, 12));
      for (int i = 0; i < count; ++i)
        s.push_back({n, i, static_cast<double>(rng.uniform_int(0, 8)) / 8.0, rng.uniform_int(0, len - 1)});
      samples.push_back(std::move(s));
      if (rng.uniform() < 0.15)
        acts.push_back(std::nullopt);
      else
        acts.push_back(static_cast<int>(rng.uniform_int(0, 1)));
    }
    std::vector<const std::vector<int>*> ptrs;
    for (auto& l : labels) ptrs.push_back(&l);
    const auto got = contrast::build_sets(samples, ptrs, acts, cfg);
    const auto want = oracle::enumerate_sets(samples, labels, acts, cfg.delta, cfg.use_activity_negatives);
    if (got.positives != want.positives || got.negatives != want.negatives) ++mismatches;
    for (std::size_t i = 0; i < got.size(); ++i)
      for (std::size_t j = 0; j < got.size(); ++j) {
        if (i == j) continue;
        const double dt = std::abs(got.anchors[i].time - got.anchors[j].time);
        boundary_pairs += dt == cfg.delta;
        const bool in_p = std::count(got.positives[i].begin(), got.positives[i].end(), static_cast<int>(j)) > 0;
        const bool in_n = std::count(got.negatives[i].begin(), got.negatives[i].end(), static_cast<int>(j)) > 0;
        excluded_pairs += !in_p && !in_n;
      }
  }
  report("set-construction", mismatches == 0 && boundary_pairs > 0 && excluded_pairs > 0,
         "500 batches, " + std::to_string(mismatches) + " mismatches, " + std::to_string(boundary_pairs) +
             " pairs at |dt|=delta, " + std::to_string(excluded_pairs) + " in neither set",
         timer.seconds());
}

/// The desk-scale experiment configuration.
train::PhaseContext experiment_context() {
  train::PhaseContext ctx;
  ctx.downsample.w0 = 4;
  ctx.train.contrast.epochs = 10;
  ctx.train.contrast_epochs_after_first = 10;
  ctx.train.classify_heads.epochs = 200;
  ctx.train.supervised_epochs = 200;
  ctx.train.classify_backbone_lr = 1e-5;
  ctx.train.icc_iterations = 4;
  ctx.train.seed = 7;
  return ctx;
}

struct RepresentationResult {
  double raw = 0.0, per_block = 0.0, after_concat = 0.0;
};

RepresentationResult run_representation(const data::Dataset& ds, const fs::path& out) {
  const auto ctx = experiment_context();
  const Rng root(ctx.train.seed);
  Rng init = root.child("init");
  net::Backbone backbone(ctx.backbone_for(ds), init);
  Rng rng = root.child("contrast", 1);
  const auto pre = train::pretrain_unsupervised(backbone, ds, ctx, rng);
  RepresentationResult r;
  const int w0 = ctx.downsample.w0;
  const auto raw = train::linear_evaluation(train::raw_features(), ds).report;
  const auto per_block = train::linear_evaluation(train::backbone_features(backbone, w0), ds).report;
  const auto after = train::linear_evaluation(
                         train::backbone_features(backbone, w0, net::UpsampleMode::kNearest, net::NormOrder::kAfterConcat), ds)
                         .report;
  r.raw = raw.mof;
  r.per_block = per_block.mof;
  r.after_concat = after.mof;
  std::ofstream csv(out / "representation.csv", std::ios::trunc);
  csv << "features," << metrics::kReportHeader << '\n';
  csv << "raw," << metrics::report_row(raw) << '\n';
  csv << "per_block," << metrics::report_row(per_block) << '\n';
  csv << "after_concat," << metrics::report_row(after) << '\n';
  std::ofstream loss(out / "pretrain_loss.csv", std::ios::trunc);
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < pre.losses.size(); ++e) loss << e + 1 << ',' << metrics::format_value(pre.losses[e]) << '\n';
  return r;
}

struct TrainingResult {
  train::IccHistory full, skip;
  metrics::MetricReport supervised;
};

/// Full ICC run (optionally interrupted after two iterations and resumed),
/// the skip-pretrain ablation and the supervised baseline.
TrainingResult run_training(const data::Dataset& ds, const fs::path& out, bool interrupt) {
  const auto ctx = experiment_context();
  TrainingResult r;
  train::IccOptions options;
  options.checkpoint_dir = out / "ckpt";
  fs::create_directories(*options.checkpoint_dir);
  if (interrupt) {
    options.stop_after = 2;
    train::run_icc(ds, ctx, options);
    options.stop_after = 0;
    options.resume = true;
  }
  r.full = train::run_icc(ds, ctx, options);
  train::write_history_csv(out / "history.csv", r.full);
  train::write_loss_csv(out / "loss.csv", r.full);
  train::IccOptions skip;
  skip.skip_pretrain = true;
  r.skip = train::run_icc(ds, ctx, skip);
  train::write_history_csv(out / "skip_history.csv", r.skip);
  train::write_loss_csv(out / "skip_loss.csv", r.skip);
  const auto sup = train::train_supervised(ds, ctx);
  r.supervised = sup.test;
  metrics::write_report_csv(out / "supervised.csv", sup.test);
  std::ofstream loss(out / "supervised_loss.csv", std::ios::trunc);
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < sup.training.losses.size(); ++e)
    loss << e + 1 << ',' << metrics::format_value(sup.training.losses[e]) << '\n';
  return r;
}

/// CSV contents with the wall-clock column of history files removed.
std::string comparable(const fs::path& p) {
  std::ifstream in(p);
  std::string out;
  const bool history = p.filename().string().find("history") != std::string::npos;
  for (std::string line; std::getline(in, line);) out += (history ? line.substr(0, line.rfind(',')) : line) + '\n';
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "icc_acceptance";
  fs::remove_all(root);
  const auto run_a = root / "a", run_b = root / "b";
  fs::create_directories(run_a);
  fs::create_directories(run_b);

  check_decomposition();
  check_continuity();
  check_gradients();
  check_metric_oracles();
  check_sets();

  const auto ds = data::synth_dataset(data::SynthSpec{}, data::SplitSpec{});
  std::printf("synthetic data: %zu train (%zu labeled), %zu test videos\n", ds.train_ids.size(),
              ds.split.labeled_ids.size(), ds.test_ids.size());

  Timer rep_timer;
  const auto rep = run_representation(ds, run_a);
  const double rep_seconds = rep_timer.seconds();
  report("representation-trend", rep.per_block - rep.raw >= 15.0,
         "probe MoF pretrained " + fmt(rep.per_block) + " vs raw " + fmt(rep.raw) + " (+" + fmt(rep.per_block - rep.raw) + ")",
         rep_seconds);
  report("normalization-order", rep.per_block >= rep.after_concat,
         "per-block " + fmt(rep.per_block) + " vs after-concat " + fmt(rep.after_concat), rep_seconds);

  Timer train_timer;
  const auto tr = run_training(ds, run_a, false);
  const double train_seconds = train_timer.seconds();
  const auto& first = tr.full.records.front().test;
  const auto& last = tr.full.records.back().test;
  const bool progress = last.mof >= first.mof && last.f1.at(10) >= first.f1.at(10);
  const bool beats_sup = last.mof - tr.supervised.mof >= 5.0;
  report("icc-progression", progress && beats_sup,
         "ICC_1 MoF " + fmt(first.mof) + " F1@10 " + fmt(first.f1.at(10)) + " -> ICC_4 MoF " + fmt(last.mof) + " F1@10 " +
             fmt(last.f1.at(10)) + "; supervised MoF " + fmt(tr.supervised.mof) + " (+" +
             fmt(last.mof - tr.supervised.mof) + ")",
         train_seconds);
  const double skip_f1 = tr.skip.records.back().test.f1.at(10);
  report("pretraining-ablation", skip_f1 <= last.f1.at(10),
         "skip-pretrain F1@10 " + fmt(skip_f1) + " vs full " + fmt(last.f1.at(10)), train_seconds);

  Timer det_timer;
  run_representation(ds, run_b);
  run_training(ds, run_b, true);
  int compared = 0, differing = 0;
  for (const auto& e : fs::directory_iterator(run_a)) {
    if (e.path().extension() != ".csv") continue;
    ++compared;
    if (comparable(e.path()) != comparable(run_b / e.path().filename())) {
      ++differing;
      std::printf("  differs: %s\n", e.path().filename().c_str());
    }
  }
  report("determinism", compared > 0 && differing == 0,
         std::to_string(compared) + " CSV files compared (repeat resumed after ICC_2), " + std::to_string(differing) +
             " differ",
         det_timer.seconds());

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
