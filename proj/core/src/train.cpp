#include "sqpf/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "sqpf/image_ops.hpp"
#include "sqpf/loss.hpp"

namespace sqpf {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t derive_init_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ull; }

struct SampleData {
  RealGrid image;
  MaskGrid mask;
};

SampleData augment_sample(const SliceSample& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SampleData d{s.image, s.mask};
  if (unit(rng) < 0.5) {
    d.image = flip_horizontal(d.image);
    d.mask = flip_horizontal(d.mask);
  }
  if (unit(rng) < 0.5) {
    d.image = flip_vertical(d.image);
    d.mask = flip_vertical(d.mask);
  }
  const double angle = (unit(rng) * 2.0 - 1.0) * (10.0 * kPi / 180.0);
  MaskGrid rotated_mask = rotate_nearest(d.mask, angle);
  if (mask_area(rotated_mask) > 0) {  // tiny structures may vanish; keep unrotated then
    d.image = rotate_bilinear(d.image, angle);
    d.mask = std::move(rotated_mask);
  }
  const double gain = 0.9 + 0.2 * unit(rng);
  const double offset = -0.1 + 0.2 * unit(rng);
  for (double& v : d.image.raw()) v = v * gain + offset;
  return d;
}

struct Sgd {
  double momentum;
  std::vector<std::vector<double>> velocity;

  explicit Sgd(const ParamSet& params, double momentum_) : momentum(momentum_) {
    for (const auto& [name, t] : params) velocity.emplace_back(t.size(), 0.0);
  }

  void step(ParamSet& params, double lr) {
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& t = params[i].second;
      if (t.grad().empty()) continue;
      auto& v = velocity[i];
      for (size_t j = 0; j < v.size(); ++j) {
        v[j] = momentum * v[j] + t.grad()[j];
        t.values()[j] -= lr * v[j];
      }
    }
  }
};

std::string serialize_rng(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

}  // namespace

PipelineConfig pipeline_config_from(const TrainConfig& config) {
  PipelineConfig cfg;
  cfg.n_regions = config.n_regions;
  cfg.temperature = config.temperature;
  cfg.alpha = config.alpha;
  cfg.beta = config.beta();
  cfg.t_b = config.t_b;
  return cfg;
}

TrainResult train_fold(const TrainConfig& config, const SliceDataset& dataset,
                       const FoldPlan& plan, std::ostream* log) {
  validate_config(config);
  const auto pool = dataset.training_pool(plan, config.fold_index);
  if (pool.empty()) throw DataError("train_fold: empty training pool");

  const int fh = dataset.image_size() / config.encoder.stride;
  const PipelineConfig pipe_cfg = pipeline_config_from(config);

  Encoder enc(config.encoder, derive_init_seed(config.seed));
  Sgd opt(enc.params(), config.momentum);
  std::mt19937_64 rng(config.seed);

  TrainResult result;
  auto last_good = enc.param_values();
  int completed_epochs = 0;
  bool diverged = false;

  for (int epoch = 0; epoch < config.epochs && !diverged; ++epoch) {
    double lr = config.learning_rate;
    if (config.lr_step_epochs > 0)
      lr *= std::pow(config.lr_decay, epoch / config.lr_step_epochs);

    for (int i = 0; i < config.episodes_per_epoch; ++i) {
      try {
        const Episode ep = sample_episode(pool, config.n_way, config.k_shot, rng);

        std::vector<SampleData> shots;
        for (const SliceSample* s : ep.query_class_support())
          shots.push_back(config.augment ? augment_sample(*s, rng)
                                         : SampleData{s->image, s->mask});
        SampleData query = config.augment ? augment_sample(*ep.query, rng)
                                          : SampleData{ep.query->image, ep.query->mask};

        std::vector<SupportShot> support;
        for (const auto& shot : shots)
          support.push_back({enc.encode(shot.image), downsample_mask(shot.mask, fh, fh)});
        const FeatureMap fq = enc.encode(query.image);

        const PipelineResult fwd = sqpf_forward(support, fq, pipe_cfg);
        const RealGrid gt = downsample_mask(query.mask, fh, fh);
        const Tensor loss =
            episode_loss(fwd.coarse, fwd.final_mask, gt, config.lambda_coarse,
                         config.lambda_final);
        if (!std::isfinite(loss.scalar())) throw NumericError("non-finite episode loss");

        for (auto& [name, p] : enc.params()) p.zero_grad();
        backward(loss);
        opt.step(enc.params(), lr);
        result.episode_losses.push_back(loss.scalar());
        if (log)
          (*log) << "epoch " << epoch + 1 << " episode " << i + 1 << " class "
                 << ep.class_label << " loss " << loss.scalar() << "\n";
      } catch (const NumericError& e) {
        if (log) (*log) << "aborting training: " << e.what() << "\n";
        diverged = true;
        break;
      }
    }
    if (!diverged) {
      last_good = enc.param_values();
      completed_epochs = epoch + 1;
    }
  }

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.epoch = completed_epochs;
  ckpt.diverged = diverged;
  ckpt.rng_state = serialize_rng(rng);
  ckpt.params = diverged ? last_good : enc.param_values();
  result.checkpoint = std::move(ckpt);
  return result;
}

EpisodePrediction predict_episode(const Encoder& enc,
                                  const std::vector<const SliceSample*>& support,
                                  const RealGrid& query_image, const PipelineConfig& cfg) {
  if (support.empty()) throw DataError("predict_episode: empty support");
  NoGradGuard no_grad;
  const int stride = enc.spec().stride;
  const int fh = query_image.rows() / stride, fw = query_image.cols() / stride;

  std::vector<SupportShot> shots;
  for (const SliceSample* s : support) {
    if (!s->image.same_shape(query_image))
      throw DataError("predict_episode: support/query image size mismatch");
    shots.push_back({enc.encode(s->image), downsample_mask(s->mask, fh, fw)});
  }
  const FeatureMap fq = enc.encode(query_image);
  const PipelineResult fwd = sqpf_forward(shots, fq, cfg);

  auto binarize_up = [&](const Tensor& prob) {
    MaskGrid m(fh, fw);
    for (int r = 0; r < fh; ++r)
      for (int c = 0; c < fw; ++c)
        m(r, c) = prob.values()[static_cast<size_t>(r) * fw + c] >= 0.5 ? 1 : 0;
    return upsample_nearest(m, stride);
  };

  EpisodePrediction pred;
  pred.final_mask = binarize_up(fwd.final_mask.fg);
  pred.coarse_mask = binarize_up(fwd.coarse.fg);
  pred.diag = fwd.diag;
  return pred;
}

namespace {

// Fixed evaluation support: the middle slices (K of them) of the middle
// training-fold case that carries the class.
std::vector<const SliceSample*> fixed_support(const std::vector<const SliceSample*>& support_pool,
                                              const std::string& cls, int k_shot) {
  auto class_pool = filter_by_class(support_pool, cls);
  if (class_pool.empty())
    throw DataError("evaluate: no support exemplar for class '" + cls + "'");
  std::map<std::string, std::vector<const SliceSample*>> by_case;
  for (const SliceSample* s : class_pool) by_case[s->case_id].push_back(s);
  auto it = by_case.begin();
  std::advance(it, (by_case.size() - 1) / 2);
  auto slices = it->second;
  std::sort(slices.begin(), slices.end(), [](const SliceSample* a, const SliceSample* b) {
    return a->slice_index < b->slice_index;
  });
  const int n = static_cast<int>(slices.size());
  const int take = std::min(k_shot, n);
  int lo = n / 2 - take / 2;
  lo = std::clamp(lo, 0, n - take);
  return {slices.begin() + lo, slices.begin() + lo + take};
}

std::vector<std::string> classes_in(const std::vector<const SliceSample*>& pool) {
  std::set<std::string> cls;
  for (const SliceSample* s : pool) cls.insert(s->class_label);
  return {cls.begin(), cls.end()};
}

}  // namespace

DiceReport evaluate(const Checkpoint& ckpt, const SliceDataset& dataset, const FoldPlan& plan,
                    int fold) {
  const Encoder enc = encoder_from_checkpoint(ckpt);
  const PipelineConfig cfg = pipeline_config_from(ckpt.config);
  const auto eval_pool = dataset.evaluation_pool(plan, fold);
  const auto support_pool = dataset.support_pool(plan, fold);

  const auto test_classes = !plan.test_classes.empty() ? plan.test_classes : dataset.classes();

  DiceReport report;
  report.fold = fold;
  report.setting = plan.setting;
  report.config_hash = config_hash(ckpt.config);
  report.dice_protocol = "volume";  // per-volume Dice over the evaluated slices of each case

  for (const auto& cls : test_classes) {
    auto class_eval = filter_by_class(eval_pool, cls);
    if (class_eval.empty())
      throw DataError("evaluate: test class '" + cls + "' absent from fold " +
                      std::to_string(fold));
    const auto support = fixed_support(support_pool, cls, ckpt.config.k_shot);

    std::map<std::string, DiceAccumulator> by_case;
    for (const SliceSample* s : class_eval) {
      const auto pred = predict_episode(enc, support, s->image, cfg);
      by_case[s->case_id].add(pred.final_mask, s->mask);
    }
    double sum = 0.0;
    for (const auto& [case_id, acc] : by_case) {
      report.per_volume[cls].emplace_back(case_id, acc.dice());
      sum += acc.dice();
    }
    report.per_class[cls] = sum / static_cast<double>(by_case.size());
  }
  report.finalize();
  return report;
}

DiceReport evaluate_episodic(const Checkpoint& ckpt, const SliceDataset& dataset,
                             const FoldPlan& plan, int fold, int n_episodes,
                             std::uint64_t seed) {
  if (n_episodes < 1) throw DataError("evaluate_episodic: n_episodes must be >= 1");
  const Encoder enc = encoder_from_checkpoint(ckpt);
  const PipelineConfig cfg = pipeline_config_from(ckpt.config);
  const auto eval_pool = dataset.evaluation_pool(plan, fold);
  const auto support_pool = dataset.support_pool(plan, fold);

  DiceReport report;
  report.fold = fold;
  report.setting = plan.setting;
  report.config_hash = config_hash(ckpt.config);
  report.dice_protocol = "episode";

  std::mt19937_64 rng(seed);
  for (const auto& cls : classes_in(eval_pool)) {
    const auto sp = filter_by_class(support_pool, cls);
    const auto qp = filter_by_class(eval_pool, cls);
    double sum = 0.0;
    for (int e = 0; e < n_episodes; ++e) {
      const Episode ep = sample_support_query(sp, qp, ckpt.config.k_shot, rng);
      const auto pred = predict_episode(enc, ep.support, ep.query->image, cfg);
      sum += dice_score(pred.final_mask, ep.query->mask);
    }
    report.per_class[cls] = sum / n_episodes;
  }
  report.finalize();
  return report;
}

DiceReport evaluate_with_config(const Checkpoint& ckpt, const SliceDataset& dataset,
                                const FoldPlan& plan, int fold) {
  if (ckpt.config.eval_episodes > 0)
    return evaluate_episodic(ckpt, dataset, plan, fold, ckpt.config.eval_episodes,
                             ckpt.config.seed + 1);
  return evaluate(ckpt, dataset, plan, fold);
}

CrossValidationResult cross_validate(const TrainConfig& config, const SliceDataset& dataset,
                                     const FoldPlan& plan, std::ostream* log) {
  CrossValidationResult result;
  std::map<std::string, double> class_sums;
  for (int fold = 0; fold < plan.k_folds; ++fold) {
    TrainConfig cfg = config;
    cfg.fold_index = fold;
    if (log) (*log) << "fold " << fold << ": training\n";
    const TrainResult tr = train_fold(cfg, dataset, plan, log);
    DiceReport rep = evaluate_with_config(tr.checkpoint, dataset, plan, fold);
    if (log) (*log) << "fold " << fold << ": mean dice " << rep.mean << "\n";
    for (const auto& [cls, d] : rep.per_class) class_sums[cls] += d;
    result.per_fold.push_back(std::move(rep));
  }
  DiceReport agg;
  agg.setting = plan.setting;
  agg.config_hash = config_hash(config);
  agg.dice_protocol = result.per_fold.front().dice_protocol;
  for (const auto& rep : result.per_fold) agg.per_fold.push_back(rep.mean);
  for (const auto& [cls, sum] : class_sums)
    agg.per_class[cls] = sum / static_cast<double>(plan.k_folds);
  agg.mean = 0.0;
  for (double m : agg.per_fold) agg.mean += m;
  agg.mean /= static_cast<double>(agg.per_fold.size());
  result.aggregate = std::move(agg);
  return result;
}

std::string ablation_mode_name(AblationMode mode) {
  switch (mode) {
    case AblationMode::kSSP: return "SSP";
    case AblationMode::kMSP: return "MSP";
    case AblationMode::kSSPQP: return "SSP+QP";
    case AblationMode::kMSPQP: return "MSP+QP";
  }
  return "?";
}

AblationMode ablation_mode_from_name(const std::string& name) {
  if (name == "SSP") return AblationMode::kSSP;
  if (name == "MSP") return AblationMode::kMSP;
  if (name == "SSP+QP") return AblationMode::kSSPQP;
  if (name == "MSP+QP") return AblationMode::kMSPQP;
  throw DataError("unknown ablation mode '" + name + "' (expected SSP, MSP, SSP+QP, MSP+QP)");
}

TrainConfig config_for_mode(const TrainConfig& base, AblationMode mode) {
  TrainConfig cfg = base;
  const int multi = base.n_regions > 1 ? base.n_regions : 4;
  const double fused = base.alpha < 1.0 ? base.alpha : 0.5;
  switch (mode) {
    case AblationMode::kSSP:
      cfg.n_regions = 1;
      cfg.alpha = 1.0;
      break;
    case AblationMode::kMSP:
      cfg.n_regions = multi;
      cfg.alpha = 1.0;
      break;
    case AblationMode::kSSPQP:
      cfg.n_regions = 1;
      cfg.alpha = fused;
      break;
    case AblationMode::kMSPQP:
      cfg.n_regions = multi;
      cfg.alpha = fused;
      break;
  }
  return cfg;
}

AblationResult ablate(const TrainConfig& base, const SliceDataset& dataset, const FoldPlan& plan,
                      const std::vector<AblationMode>& modes, const std::vector<int>& folds,
                      std::ostream* log) {
  if (modes.empty()) throw DataError("ablate: no modes requested");
  if (folds.empty()) throw DataError("ablate: no folds requested");
  AblationResult result;
  result.folds = folds;
  for (const AblationMode mode : modes) {
    AblationRow row;
    row.mode = mode;
    const TrainConfig cfg = config_for_mode(base, mode);
    for (int fold : folds) {
      TrainConfig fold_cfg = cfg;
      fold_cfg.fold_index = fold;
      if (log)
        (*log) << "ablation " << ablation_mode_name(mode) << " fold " << fold << "\n";
      const TrainResult tr = train_fold(fold_cfg, dataset, plan, log);
      const DiceReport rep = evaluate_with_config(tr.checkpoint, dataset, plan, fold);
      row.fold_scores.push_back(rep.mean);
      if (log)
        (*log) << "ablation " << ablation_mode_name(mode) << " fold " << fold << " dice "
               << rep.mean << "\n";
    }
    row.mean = 0.0;
    for (double d : row.fold_scores) row.mean += d;
    row.mean /= static_cast<double>(row.fold_scores.size());
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::vector<AlphaSweepPoint> alpha_sweep(const TrainConfig& base, const SliceDataset& dataset,
                                         const FoldPlan& plan, const std::vector<double>& alphas,
                                         int fold, std::ostream* log) {
  if (alphas.empty()) throw DataError("alpha_sweep: empty alpha grid");
  for (double a : alphas)
    if (a < 0.0 || a > 1.0) throw DataError("alpha_sweep: alpha outside [0,1]");

  TrainConfig cfg = base;
  cfg.fold_index = fold;
  if (log) (*log) << "alpha sweep: training once at alpha " << cfg.alpha << "\n";
  const TrainResult tr = train_fold(cfg, dataset, plan, log);

  std::vector<AlphaSweepPoint> points;
  for (double a : alphas) {
    Checkpoint ckpt = tr.checkpoint;
    ckpt.config.alpha = a;
    const DiceReport rep = evaluate_with_config(ckpt, dataset, plan, fold);
    if (log) (*log) << "alpha " << a << " mean dice " << rep.mean << "\n";
    points.push_back({a, rep.mean});
  }
  return points;
}

}  // namespace sqpf
