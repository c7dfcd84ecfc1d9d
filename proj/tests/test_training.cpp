#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sqpf/loss.hpp"
#include "sqpf/report.hpp"
#include "sqpf/synthetic.hpp"
#include "sqpf/train.hpp"
#include "test_util.hpp"

using namespace sqpf;
using sqpf_test::central_diff;
using sqpf_test::close;
using sqpf_test::random_grid;
using sqpf_test::random_mask;
using sqpf_test::TempDir;

namespace {

SliceDataset small_synth_dataset(int n_cases, int image_size, std::uint64_t seed) {
  SyntheticConfig cfg = default_synthetic_config();
  cfg.n_cases = n_cases;
  cfg.image_size = image_size;
  cfg.seed = seed;
  return SliceDataset::assemble(synth_generate(cfg), false);
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.episodes_per_epoch = 10;
  cfg.epochs = 1;
  cfg.encoder.kind = EncoderKind::kTiny;
  cfg.encoder.feature_channels = 16;
  cfg.k_folds = 2;
  cfg.fold_index = 0;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("dice_score hand cases") {
  MaskGrid a(4, 4, 0), b(4, 4, 0);
  a(0, 0) = a(0, 1) = 1;
  b(0, 0) = b(2, 2) = 1;
  CHECK(dice_score(a, b) == doctest::Approx(50.0).epsilon(1e-12));  // |A|=2 |B|=2 inter=1
  CHECK(dice_score(a, a) == doctest::Approx(100.0));
  MaskGrid c(4, 4, 0);
  c(3, 3) = 1;
  CHECK(dice_score(a, c) == doctest::Approx(0.0));
  CHECK(dice_score(MaskGrid(4, 4, 0), MaskGrid(4, 4, 0)) == doctest::Approx(100.0));
}

TEST_CASE("dice_score shape mismatch") {
  CHECK_THROWS_AS(dice_score(MaskGrid(4, 4, 0), MaskGrid(4, 5, 0)), DataError);
}

TEST_CASE("dice_score matches a brute-force oracle and is symmetric") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const MaskGrid a = random_mask(16, 16, rng, 0.3, false);
    const MaskGrid b = random_mask(16, 16, rng, 0.3, false);
    long long inter = 0, na = 0, nb = 0;
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) {
        inter += (a(r, c) != 0) && (b(r, c) != 0);
        na += a(r, c) != 0;
        nb += b(r, c) != 0;
      }
    const double expected =
        (na + nb) == 0 ? 100.0 : 200.0 * static_cast<double>(inter) / (na + nb);
    CHECK(dice_score(a, b) == expected);
    CHECK(dice_score(a, b) == dice_score(b, a));
  }
}

TEST_CASE("episode_loss closed forms") {
  // exact one-hot prediction: loss -> 0
  RealGrid gt(4, 4, 0.0);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) gt(r, c) = 1.0;
  const ProbabilityMask exact = ProbabilityMask::from_fg_probabilities(gt);
  CHECK(episode_loss(exact, exact, gt, 0.0, 1.0).scalar() < 1e-12);

  // uniform prediction: loss = ln 2
  const ProbabilityMask half = ProbabilityMask::from_fg_probabilities(RealGrid(4, 4, 0.5));
  CHECK(episode_loss(half, half, gt, 0.0, 1.0).scalar() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // degenerate weights
  CHECK(episode_loss(half, half, gt, 0.0, 0.0).scalar() == 0.0);
}

TEST_CASE("episode_loss equals the probability-form cross entropy") {
  std::mt19937_64 rng(5);
  const RealGrid p = random_grid(6, 6, rng, 0.01, 0.99);
  const RealGrid t = random_grid(6, 6, rng, 0.0, 1.0);
  const ProbabilityMask pm = ProbabilityMask::from_fg_probabilities(p);
  const double loss = episode_loss(pm, pm, t, 0.0, 1.0).scalar();
  double expected = 0.0;
  for (size_t i = 0; i < p.size(); ++i)
    expected -= t.raw()[i] * std::log(p.raw()[i]) +
                (1.0 - t.raw()[i]) * std::log(1.0 - p.raw()[i]);
  expected /= static_cast<double>(p.size());
  CHECK(loss == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("episode_loss validates weights and ranges") {
  const ProbabilityMask pm = ProbabilityMask::from_fg_probabilities(RealGrid(2, 2, 0.5));
  RealGrid gt(2, 2, 0.5);
  CHECK_THROWS_AS(episode_loss(pm, pm, gt, -1.0, 1.0), DataError);
  RealGrid bad(2, 2, 2.0);
  CHECK_THROWS_AS(ProbabilityMask::from_fg_probabilities(bad), DataError);
}

TEST_CASE("binarization at 0.5 equals the two-class argmax") {
  std::mt19937_64 rng(7);
  RealGrid p = random_grid(8, 8, rng, 0.0, 1.0);
  p(0, 0) = 0.5;  // force the tie
  const ProbabilityMask pm = ProbabilityMask::from_fg_probabilities(p);
  for (size_t i = 0; i < p.size(); ++i) {
    const bool thresholded = pm.fg.values()[i] >= 0.5;
    const bool argmax = pm.fg.values()[i] >= pm.bg.values()[i];
    CHECK(thresholded == argmax);
  }
}

TEST_CASE("full-pipeline gradient check with detached selection") {
  // tiny encoder on 16x16 inputs; see the spec'd straight-through contract:
  // the hard-selection masks are constants of the forward pass
  Encoder enc({EncoderKind::kTiny, 16, 4, ""}, 31);
  std::mt19937_64 rng(17);
  RealGrid support_img = random_grid(16, 16, rng, -1, 1);
  RealGrid query_img = random_grid(16, 16, rng, -1, 1);
  MaskGrid support_mask(16, 16, 0);
  for (int r = 4; r < 12; ++r)
    for (int c = 5; c < 13; ++c) support_mask(r, c) = 1;
  MaskGrid query_mask(16, 16, 0);
  for (int r = 6; r < 14; ++r)
    for (int c = 2; c < 10; ++c) query_mask(r, c) = 1;

  PipelineConfig cfg;
  const RealGrid gt = downsample_mask(query_mask, 4, 4);
  const RealGrid smask = downsample_mask(support_mask, 4, 4);

  // base forward fixes the selection
  HardSelection sel;
  {
    const FeatureMap fs = enc.encode(support_img);
    const FeatureMap fq = enc.encode(query_img);
    const PipelineResult base = sqpf_forward({{fs, smask}}, fq, cfg);
    sel = hard_select(base.coarse, base.diag.t_f, cfg.t_b);
    REQUIRE(mask_area(sel.fg) > 0);
    REQUIRE(mask_area(sel.bg) > 0);
  }

  auto loss_fn = [&]() {
    const FeatureMap fs = enc.encode(support_img);
    const FeatureMap fq = enc.encode(query_img);
    const PipelineResult res = sqpf_forward({{fs, smask}}, fq, cfg, &sel);
    return episode_loss(res.coarse, res.final_mask, gt, 1.0, 1.0);
  };

  Tensor loss = loss_fn();
  for (auto& [name, p] : enc.params()) p.zero_grad();
  backward(loss);
  auto eval = [&]() { return loss_fn().scalar(); };

  std::mt19937_64 pick_rng(23);
  int checked = 0, nonzero = 0;
  for (auto& [name, p] : enc.params()) {
    const auto& grad = p.grad();
    REQUIRE(grad.size() == p.size());
    std::vector<size_t> idx;
    if (p.size() <= 16) {
      for (size_t i = 0; i < p.size(); ++i) idx.push_back(i);
    } else {
      std::uniform_int_distribution<size_t> pick(0, p.size() - 1);
      for (int i = 0; i < 6; ++i) idx.push_back(pick(pick_rng));
    }
    for (size_t i : idx) {
      const double fd = central_diff(eval, p, i);
      INFO("param ", name, " coord ", i, " analytic ", grad[i], " fd ", fd);
      CHECK(close(grad[i], fd, 1e-3, 1e-6));
      ++checked;
      if (std::abs(grad[i]) > 1e-12) ++nonzero;
    }
  }
  CHECK(checked > 80);
  CHECK(nonzero > 40);  // gradient genuinely flows through MAP/cosine/fusion
}

TEST_CASE("train_fold with zero epochs returns the initialization") {
  const SliceDataset dataset = small_synth_dataset(6, 32, 11);
  const FoldPlan plan = make_folds(dataset.cases(), 2, Setting::kSetting1);
  TrainConfig cfg = small_train_config();
  cfg.epochs = 0;
  const TrainResult result = train_fold(cfg, dataset, plan);
  CHECK(result.checkpoint.epoch == 0);
  CHECK_FALSE(result.checkpoint.diverged);
  CHECK(result.episode_losses.empty());
  // matches a fresh encoder with the same derivation
  Encoder fresh(cfg.encoder, cfg.seed ^ 0x9E3779B97F4A7C15ull);
  const auto expected = fresh.param_values();
  REQUIRE(result.checkpoint.params.size() == expected.size());
  for (size_t i = 0; i < expected.size(); ++i)
    CHECK(result.checkpoint.params[i].second == expected[i].second);
}

TEST_CASE("train_fold is deterministic for a fixed seed") {
  const SliceDataset dataset = small_synth_dataset(6, 32, 13);
  const FoldPlan plan = make_folds(dataset.cases(), 2, Setting::kSetting1);
  const TrainConfig cfg = small_train_config();
  const TrainResult a = train_fold(cfg, dataset, plan);
  const TrainResult b = train_fold(cfg, dataset, plan);
  CHECK(a.episode_losses == b.episode_losses);
  REQUIRE(a.checkpoint.params.size() == b.checkpoint.params.size());
  for (size_t i = 0; i < a.checkpoint.params.size(); ++i)
    CHECK(a.checkpoint.params[i].second == b.checkpoint.params[i].second);
}

TEST_CASE("train_fold aborts on numeric failure with the last good parameters") {
  // dataset poisoned with non-finite slices: the first episode raises
  // NumericError and training returns the init checkpoint
  SyntheticConfig scfg = default_synthetic_config();
  scfg.n_cases = 4;
  scfg.image_size = 32;
  scfg.shape_families = {"ellipse"};
  scfg.seed = 5;
  auto samples = synth_generate(scfg);
  for (auto& s : samples) s.image(3, 3) = std::numeric_limits<double>::quiet_NaN();
  const SliceDataset dataset = SliceDataset::assemble(std::move(samples), true);
  FoldPlan plan;
  plan.k_folds = 2;
  plan.setting = Setting::kSetting1;
  plan.assignments = {{"synth_000", 0}, {"synth_001", 1}, {"synth_002", 1}, {"synth_003", 1}};

  TrainConfig cfg = small_train_config();
  cfg.epochs = 2;
  cfg.episodes_per_epoch = 4;
  const TrainResult result = train_fold(cfg, dataset, plan);
  CHECK(result.checkpoint.diverged);
  CHECK(result.checkpoint.epoch == 0);
  Encoder fresh(cfg.encoder, cfg.seed ^ 0x9E3779B97F4A7C15ull);
  const auto expected = fresh.param_values();
  for (size_t i = 0; i < expected.size(); ++i)
    CHECK(result.checkpoint.params[i].second == expected[i].second);
}

TEST_CASE("checkpoint round trip reproduces forward outputs bit-exactly") {
  TempDir dir("ckpt");
  const SliceDataset dataset = small_synth_dataset(6, 32, 17);
  const FoldPlan plan = make_folds(dataset.cases(), 2, Setting::kSetting1);
  TrainConfig cfg = small_train_config();
  cfg.episodes_per_epoch = 5;
  const TrainResult result = train_fold(cfg, dataset, plan);

  const auto path = dir.path() / "run.ckpt";
  save_checkpoint(path, result.checkpoint);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.epoch == result.checkpoint.epoch);
  CHECK(back.rng_state == result.checkpoint.rng_state);
  CHECK(canonical_config_string(back.config) ==
        canonical_config_string(result.checkpoint.config));

  const Encoder e1 = encoder_from_checkpoint(result.checkpoint);
  const Encoder e2 = encoder_from_checkpoint(back);
  std::mt19937_64 rng(3);
  const RealGrid img = random_grid(32, 32, rng, -1, 1);
  NoGradGuard no_grad;
  CHECK(e1.encode(img).values() == e2.encode(img).values());
}

TEST_CASE("checkpoint version mismatch names both versions") {
  TempDir dir("ckptver");
  const auto path = dir.path() / "bad.ckpt";
  Checkpoint ckpt;
  ckpt.config = small_train_config();
  save_checkpoint(path, ckpt);
  // bump the stored version field (offset 8, after the magic)
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const std::uint32_t bogus = 42;
    f.write(reinterpret_cast<const char*>(&bogus), sizeof(bogus));
  }
  try {
    load_checkpoint(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("42") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
}

TEST_CASE("config canonical string round-trips and hashes stably") {
  TrainConfig cfg = small_train_config();
  cfg.test_classes = {"crescent"};
  cfg.train_classes = {"ellipse", "rectangle"};
  cfg.alpha = 0.3;
  const std::string text = canonical_config_string(cfg);
  const TrainConfig back = parse_config_string(text);
  CHECK(canonical_config_string(back) == text);
  CHECK(config_hash(back) == config_hash(cfg));
  cfg.alpha = 0.31;
  CHECK(config_hash(back) != config_hash(cfg));
}

TEST_CASE("DiceAccumulator reassembles volumes (metric passthrough)") {
  std::mt19937_64 rng(19);
  DiceAccumulator acc;
  for (int s = 0; s < 4; ++s) {
    const MaskGrid gt = random_mask(16, 16, rng, 0.3);
    acc.add(gt, gt);
  }
  CHECK(acc.dice() == doctest::Approx(100.0));
}

TEST_CASE("evaluate produces a volume-protocol report over test classes") {
  const SliceDataset dataset = small_synth_dataset(8, 32, 23);
  const FoldPlan plan = make_folds(dataset.cases(), 2, Setting::kSetting2,
                                   ClassSplit{{"ellipse", "rectangle"}, {"crescent"}}, 1);
  TrainConfig cfg = small_train_config();
  cfg.setting = Setting::kSetting2;
  cfg.epochs = 0;
  const TrainResult tr = train_fold(cfg, dataset, plan);

  const DiceReport report = evaluate(tr.checkpoint, dataset, plan, 0);
  CHECK(report.dice_protocol == "volume");
  CHECK(report.per_class.size() == 1);
  CHECK(report.per_class.count("crescent") == 1);
  CHECK(!report.per_volume.at("crescent").empty());
  CHECK(report.mean == report.per_class.at("crescent"));
  CHECK(report.config_hash == config_hash(tr.checkpoint.config));

  // deterministic: identical bytes on a second run
  const DiceReport again = evaluate(tr.checkpoint, dataset, plan, 0);
  CHECK(dice_report_to_json(report) == dice_report_to_json(again));
}

TEST_CASE("evaluate_episodic reports per-episode means") {
  const SliceDataset dataset = small_synth_dataset(8, 32, 29);
  const FoldPlan plan = make_folds(dataset.cases(), 2, Setting::kSetting2,
                                   ClassSplit{{"ellipse", "rectangle"}, {"crescent"}}, 2);
  TrainConfig cfg = small_train_config();
  cfg.setting = Setting::kSetting2;
  cfg.epochs = 0;
  const TrainResult tr = train_fold(cfg, dataset, plan);
  const DiceReport report = evaluate_episodic(tr.checkpoint, dataset, plan, 0, 10, 7);
  CHECK(report.dice_protocol == "episode");
  CHECK(report.per_class.count("crescent") == 1);
  CHECK(report.mean >= 0.0);
  CHECK(report.mean <= 100.0);
}

TEST_CASE("short training run reduces the loss on easy synthetic data") {
  const SliceDataset dataset = small_synth_dataset(8, 32, 31);
  const FoldPlan plan = make_folds(dataset.cases(), 2, Setting::kSetting1);
  TrainConfig cfg = small_train_config();
  cfg.epochs = 3;
  cfg.episodes_per_epoch = 60;
  cfg.learning_rate = 2e-3;
  const TrainResult result = train_fold(cfg, dataset, plan);
  REQUIRE(result.episode_losses.size() == 180);
  double head = 0, tail = 0;
  for (int i = 0; i < 30; ++i) head += result.episode_losses[i];
  for (int i = 150; i < 180; ++i) tail += result.episode_losses[i];
  CHECK(tail < head);
}

TEST_CASE("cross_validate aggregates fold means") {
  const SliceDataset dataset = small_synth_dataset(6, 32, 37);
  const FoldPlan plan = make_folds(dataset.cases(), 2, Setting::kSetting1);
  TrainConfig cfg = small_train_config();
  cfg.k_folds = 2;
  cfg.epochs = 1;
  cfg.episodes_per_epoch = 5;
  cfg.eval_episodes = 4;
  const CrossValidationResult cv = cross_validate(cfg, dataset, plan);
  CHECK(cv.per_fold.size() == 2);
  CHECK(cv.aggregate.per_fold.size() == 2);
  const double expected = (cv.per_fold[0].mean + cv.per_fold[1].mean) / 2.0;
  CHECK(cv.aggregate.mean == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ablation mode configurations") {
  TrainConfig base = small_train_config();
  base.n_regions = 4;
  base.alpha = 0.5;
  CHECK(config_for_mode(base, AblationMode::kSSP).n_regions == 1);
  CHECK(config_for_mode(base, AblationMode::kSSP).alpha == 1.0);
  CHECK(config_for_mode(base, AblationMode::kMSP).n_regions == 4);
  CHECK(config_for_mode(base, AblationMode::kMSP).alpha == 1.0);
  CHECK(config_for_mode(base, AblationMode::kSSPQP).n_regions == 1);
  CHECK(config_for_mode(base, AblationMode::kSSPQP).alpha == 0.5);
  CHECK(config_for_mode(base, AblationMode::kMSPQP).n_regions == 4);
  CHECK(config_for_mode(base, AblationMode::kMSPQP).alpha == 0.5);
  CHECK(ablation_mode_from_name("MSP+QP") == AblationMode::kMSPQP);
  CHECK_THROWS_AS(ablation_mode_from_name("bogus"), DataError);
}

TEST_CASE("ablate emits one row per mode") {
  const SliceDataset dataset = small_synth_dataset(6, 32, 41);
  const FoldPlan plan = make_folds(dataset.cases(), 2, Setting::kSetting1);
  TrainConfig cfg = small_train_config();
  cfg.epochs = 1;
  cfg.episodes_per_epoch = 5;
  cfg.eval_episodes = 4;
  const AblationResult result = ablate(cfg, dataset, plan, {AblationMode::kSSP}, {0});
  CHECK(result.rows.size() == 1);
  CHECK(result.rows[0].fold_scores.size() == 1);
  CHECK_THROWS_AS(ablate(cfg, dataset, plan, {}, {0}), DataError);
}

TEST_CASE("report writers emit the documented layouts") {
  TempDir dir("reports");
  DiceReport report;
  report.per_class = {{"crescent", 81.25}, {"ellipse", 92.5}};
  report.finalize();
  report.config_hash = "deadbeef";
  report.dice_protocol = "volume";
  write_dice_report_csv(dir.path() / "report.csv", report);
  std::ifstream in(dir.path() / "report.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "class,dice");
  std::getline(in, line);
  CHECK(line.rfind("crescent,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("ellipse,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("mean,", 0) == 0);

  AblationResult ab;
  ab.folds = {0, 1};
  ab.rows = {{AblationMode::kSSP, {60.0, 62.0}, 61.0}, {AblationMode::kMSPQP, {70.0, 71.0}, 70.5}};
  write_ablation_csv(dir.path() / "ablation.csv", ab);
  std::ifstream in2(dir.path() / "ablation.csv");
  std::getline(in2, line);
  CHECK(line == "mode,fold1,fold2,mean");
  std::getline(in2, line);
  CHECK(line.rfind("SSP,", 0) == 0);

  const std::vector<AlphaSweepPoint> points = {{0.1, 60}, {0.5, 70}, {1.0, 65}};
  write_alpha_sweep_csv(dir.path() / "sweep.csv", points);
  write_alpha_sweep_svg(dir.path() / "sweep.svg", points);
  std::ifstream svg(dir.path() / "sweep.svg");
  std::string content((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.find("polyline") != std::string::npos);

  // single-point sweep still renders
  write_alpha_sweep_svg(dir.path() / "one.svg", {{1.0, 65}});
}
