#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sqpf/encoder.hpp"
#include "sqpf/grid.hpp"
#include "sqpf/tensor.hpp"

namespace sqpf {

enum class PrototypeRole {
  kSupportFg,
  kSupportBg,
  kQueryFg,
  kQueryBg,
  kFusedFg,
  kFusedBg,
};

std::string prototype_role_name(PrototypeRole role);

// A C-dimensional class descriptor living in feature space.
struct Prototype {
  Tensor vec;  // shape {C}
  PrototypeRole role = PrototypeRole::kSupportFg;

  int channels() const { return vec.dim(0); }
};

// Foreground split into soft regional masks at feature resolution. Regions
// sum to the source mask and each carries positive mass.
struct RegionPartition {
  std::vector<RealGrid> regions;
  RealGrid source_mask;
};

// Per-pixel two-class probabilities. bg is constructed as 1 - fg; the raw
// logit (temperature-scaled cosine difference) is kept for the loss.
struct ProbabilityMask {
  Tensor fg;     // {H,W}
  Tensor bg;     // {H,W}
  Tensor logit;  // {H,W}

  static ProbabilityMask from_fg_probabilities(const RealGrid& fg, double logit_clamp = 40.0);
};

// Binarized coarse prediction (Eq. 5-6 style hard selection).
struct HardSelection {
  MaskGrid fg;
  MaskGrid bg;
  double t_f = 0.0;
  double t_b = 0.5;
};

// --- operations -----------------------------------------------------------

// Splits a soft foreground mask into at most n_regions cells of a regular
// g x g grid over the mask's bounding box (g = ceil(sqrt(n_regions))). Empty
// cells are dropped; if more than n_regions nonempty cells remain, the
// smallest-mass cells are merged pairwise until the bound holds.
RegionPartition partition_foreground(const RealGrid& mask, int n_regions);

// Mask Average Pooling: the Hadamard-weighted channel mean
// p_c = sum(F_c * u) / sum(u). Errors on zero-mass masks.
Prototype masked_average_pool(const FeatureMap& features, const RealGrid& mask,
                              PrototypeRole role = PrototypeRole::kSupportFg);

// Mean of the regional MAP prototypes (the 1/N_r sum over segments).
Prototype support_prototype(const FeatureMap& support_features, const RegionPartition& partition);

// MAP against the complement mask (1 - fg). Errors on all-foreground masks.
Prototype background_prototype(const FeatureMap& support_features, const RealGrid& fg_mask);

// Per-pixel two-way softmax over temperature-scaled cosine similarities to
// the foreground and background prototypes.
ProbabilityMask coarse_query_mask(const FeatureMap& query_features, const Prototype& p_fg,
                                  const Prototype& p_bg, double temperature);

// T_f = (max(fg) + mean(fg)) / 2.
double foreground_threshold(const RealGrid& fg_probabilities);

// Inclusive thresholding: fg = 1 iff p_fg >= t_f, bg = 1 iff p_bg >= t_b.
HardSelection hard_select(const ProbabilityMask& pm, double t_f, double t_b = 0.5);

// MAP of the query features against the hard-selected masks. An empty
// selection yields an unset optional (the "no confident foreground" signal;
// callers fall back to the coarse mask).
struct QueryPrototypes {
  std::optional<Prototype> fg;
  std::optional<Prototype> bg;
};
QueryPrototypes query_prototype(const FeatureMap& query_features, const HardSelection& sel);

// Convex combination alpha*p_s + beta*p_q of role-matched prototypes
// (fg with fg, bg with bg); alpha, beta >= 0 and alpha + beta = 1.
Prototype fuse_prototypes(const Prototype& p_s, const Prototype& p_q, double alpha, double beta);

// Same contract as coarse_query_mask, applied to the fused prototypes.
ProbabilityMask final_prediction(const FeatureMap& query_features, const Prototype& p_final_fg,
                                 const Prototype& p_final_bg, double temperature);

// --- full pipeline ----------------------------------------------------------

struct PipelineConfig {
  int n_regions = 4;
  double temperature = 20.0;
  double alpha = 0.5;
  double beta = 0.5;
  double t_b = 0.5;
};

struct PipelineDiagnostics {
  double t_f = 0.0;
  long long fg_selected = 0;
  long long bg_selected = 0;
  bool fallback = false;  // final == coarse because a selection was empty
  std::vector<int> regions_per_shot;
};

std::string diagnostics_to_json(const PipelineDiagnostics& diag);

struct SupportShot {
  FeatureMap features;  // {C,H',W'}
  RealGrid fg_mask;     // soft mask at feature resolution
};

struct PipelineResult {
  ProbabilityMask coarse;
  ProbabilityMask final_mask;
  PipelineDiagnostics diag;
  Prototype support_fg;
  Prototype support_bg;
  std::optional<Prototype> query_fg, query_bg;
  std::optional<Prototype> fused_fg, fused_bg;
};

// Runs the full chain: regional support prototypes -> coarse mask ->
// adaptive threshold -> hard selection -> query prototypes -> fusion ->
// final prediction. K-shot supports average their per-shot prototypes.
// `fixed_selection`, when given, replaces the computed hard selection (used
// by the gradient checks, which treat the selection as a constant of the
// forward pass).
PipelineResult sqpf_forward(const std::vector<SupportShot>& support,
                            const FeatureMap& query_features, const PipelineConfig& cfg,
                            const HardSelection* fixed_selection = nullptr);

}  // namespace sqpf
