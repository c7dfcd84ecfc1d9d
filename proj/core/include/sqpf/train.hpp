#pragma once

#include <iosfwd>
#include <vector>

#include "sqpf/checkpoint.hpp"
#include "sqpf/dataset.hpp"
#include "sqpf/episodes.hpp"
#include "sqpf/metrics.hpp"
#include "sqpf/prototype.hpp"

namespace sqpf {

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> episode_losses;
};

// Episodic training on the fold's training pool: SGD with momentum over
// episodes_per_epoch * epochs sampled episodes. Deterministic for a fixed
// config and seed (single worker). A non-finite loss aborts and returns the
// last epoch-boundary parameters with `diverged` set.
TrainResult train_fold(const TrainConfig& config, const SliceDataset& dataset,
                       const FoldPlan& plan, std::ostream* log = nullptr);

// Cross-validation evaluation: for every test class, a fixed support (middle
// slices of the middle training-fold case) predicts every fold slice once;
// predictions binarize at fg >= 0.5, upsample nearest to input resolution,
// reassemble per volume, and score per-volume Dice over the evaluated
// slices of each case.
DiceReport evaluate(const Checkpoint& ckpt, const SliceDataset& dataset, const FoldPlan& plan,
                    int fold);

// Episode-protocol evaluation: per test class, n_episodes random draws with
// the support from training-fold cases and the query from the fold.
DiceReport evaluate_episodic(const Checkpoint& ckpt, const SliceDataset& dataset,
                             const FoldPlan& plan, int fold, int n_episodes, std::uint64_t seed);

// Dispatches on config.eval_episodes (0 = volume protocol).
DiceReport evaluate_with_config(const Checkpoint& ckpt, const SliceDataset& dataset,
                                const FoldPlan& plan, int fold);

struct CrossValidationResult {
  std::vector<DiceReport> per_fold;
  DiceReport aggregate;
};

CrossValidationResult cross_validate(const TrainConfig& config, const SliceDataset& dataset,
                                     const FoldPlan& plan, std::ostream* log = nullptr);

// Ablation matrix: SSP (single support prototype), MSP (multi-region),
// and their +QP variants with prototype fusion enabled.
enum class AblationMode { kSSP, kMSP, kSSPQP, kMSPQP };

std::string ablation_mode_name(AblationMode mode);
AblationMode ablation_mode_from_name(const std::string& name);
TrainConfig config_for_mode(const TrainConfig& base, AblationMode mode);

struct AblationRow {
  AblationMode mode;
  std::vector<double> fold_scores;
  double mean = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<int> folds;
};

AblationResult ablate(const TrainConfig& base, const SliceDataset& dataset, const FoldPlan& plan,
                      const std::vector<AblationMode>& modes, const std::vector<int>& folds,
                      std::ostream* log = nullptr);

struct AlphaSweepPoint {
  double alpha = 0.0;
  double mean_dice = 0.0;
};

// One training run at the base config, then re-evaluation at each fusion
// weight (alpha only enters the inference-time combination).
std::vector<AlphaSweepPoint> alpha_sweep(const TrainConfig& base, const SliceDataset& dataset,
                                         const FoldPlan& plan, const std::vector<double>& alphas,
                                         int fold, std::ostream* log = nullptr);

// Inference on one episode: binarized (fg >= 0.5) coarse and final masks
// nearest-upsampled to input resolution.
struct EpisodePrediction {
  MaskGrid final_mask;
  MaskGrid coarse_mask;
  PipelineDiagnostics diag;
};

EpisodePrediction predict_episode(const Encoder& enc,
                                  const std::vector<const SliceSample*>& support,
                                  const RealGrid& query_image, const PipelineConfig& cfg);

PipelineConfig pipeline_config_from(const TrainConfig& config);

}  // namespace sqpf
