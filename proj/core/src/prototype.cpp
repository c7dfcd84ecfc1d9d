#include "sqpf/prototype.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

namespace sqpf {

std::string prototype_role_name(PrototypeRole role) {
  switch (role) {
    case PrototypeRole::kSupportFg: return "support_fg";
    case PrototypeRole::kSupportBg: return "support_bg";
    case PrototypeRole::kQueryFg: return "query_fg";
    case PrototypeRole::kQueryBg: return "query_bg";
    case PrototypeRole::kFusedFg: return "fused_fg";
    case PrototypeRole::kFusedBg: return "fused_bg";
  }
  return "?";
}

ProbabilityMask ProbabilityMask::from_fg_probabilities(const RealGrid& fg, double logit_clamp) {
  RealGrid logit(fg.rows(), fg.cols());
  for (size_t i = 0; i < fg.size(); ++i) {
    const double p = fg.raw()[i];
    if (p < 0.0 || p > 1.0)
      throw DataError("ProbabilityMask: probability outside [0,1]");
    double z;
    if (p <= 0.0) z = -logit_clamp;
    else if (p >= 1.0) z = logit_clamp;
    else z = std::clamp(std::log(p / (1.0 - p)), -logit_clamp, logit_clamp);
    logit.raw()[i] = z;
  }
  ProbabilityMask pm;
  pm.logit = Tensor::from_grid(logit);
  pm.fg = Tensor::from_grid(fg);
  pm.bg = affine(pm.fg, -1.0, 1.0);
  return pm;
}

RegionPartition partition_foreground(const RealGrid& mask, int n_regions) {
  if (n_regions < 1) throw DataError("partition_foreground: n_regions must be >= 1");
  if (!(mask_mass(mask) > 0.0)) throw DataError("partition_foreground: empty mask");

  // bounding box of positive mass
  int r0 = mask.rows(), r1 = -1, c0 = mask.cols(), c1 = -1;
  for (int r = 0; r < mask.rows(); ++r)
    for (int c = 0; c < mask.cols(); ++c)
      if (mask(r, c) > 0.0) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }

  const int g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_regions))));
  const int bh = r1 - r0 + 1, bw = c1 - c0 + 1;

  RegionPartition part;
  part.source_mask = mask;
  for (int gi = 0; gi < g; ++gi) {
    const int rr0 = r0 + gi * bh / g;
    const int rr1 = r0 + (gi + 1) * bh / g;  // exclusive
    if (rr1 <= rr0) continue;
    for (int gj = 0; gj < g; ++gj) {
      const int cc0 = c0 + gj * bw / g;
      const int cc1 = c0 + (gj + 1) * bw / g;
      if (cc1 <= cc0) continue;
      RealGrid region(mask.rows(), mask.cols(), 0.0);
      double mass = 0.0;
      for (int r = rr0; r < rr1; ++r)
        for (int c = cc0; c < cc1; ++c) {
          region(r, c) = mask(r, c);
          mass += mask(r, c);
        }
      if (mass > 0.0) part.regions.push_back(std::move(region));
    }
  }

  // A g x g grid can hold more nonempty cells than n_regions (g*g > n when n
  // is not a perfect square); merge the smallest-mass cells until the bound
  // holds. Masses stay positive and the sum over regions is untouched.
  while (static_cast<int>(part.regions.size()) > n_regions) {
    size_t smallest = 0, second = 1;
    double m0 = mask_mass(part.regions[0]);
    double m1 = mask_mass(part.regions[1]);
    if (m1 < m0) {
      std::swap(smallest, second);
      std::swap(m0, m1);
    }
    for (size_t i = 2; i < part.regions.size(); ++i) {
      const double m = mask_mass(part.regions[i]);
      if (m < m0) {
        second = smallest;
        m1 = m0;
        smallest = i;
        m0 = m;
      } else if (m < m1) {
        second = i;
        m1 = m;
      }
    }
    auto& dst = part.regions[std::min(smallest, second)];
    const auto& src = part.regions[std::max(smallest, second)];
    for (size_t i = 0; i < dst.size(); ++i) dst.raw()[i] += src.raw()[i];
    part.regions.erase(part.regions.begin() + static_cast<long>(std::max(smallest, second)));
  }
  return part;
}

Prototype masked_average_pool(const FeatureMap& features, const RealGrid& mask,
                              PrototypeRole role) {
  Prototype p;
  p.vec = map_pool(features, mask);
  p.role = role;
  return p;
}

Prototype support_prototype(const FeatureMap& support_features,
                            const RegionPartition& partition) {
  if (partition.regions.empty()) throw DataError("support_prototype: empty partition");
  std::vector<Tensor> pooled;
  pooled.reserve(partition.regions.size());
  for (const auto& region : partition.regions)
    pooled.push_back(map_pool(support_features, region));
  Prototype p;
  p.vec = mean_of(pooled);
  p.role = PrototypeRole::kSupportFg;
  return p;
}

Prototype background_prototype(const FeatureMap& support_features, const RealGrid& fg_mask) {
  RealGrid bg(fg_mask.rows(), fg_mask.cols());
  double mass = 0.0;
  for (size_t i = 0; i < fg_mask.size(); ++i) {
    bg.raw()[i] = 1.0 - fg_mask.raw()[i];
    mass += bg.raw()[i];
  }
  if (!(mass > 0.0)) throw DataError("background_prototype: all-foreground mask");
  Prototype p;
  p.vec = map_pool(support_features, bg);
  p.role = PrototypeRole::kSupportBg;
  return p;
}

namespace {

void check_prototype_usable(const Prototype& p, const char* what) {
  double norm2 = 0.0;
  for (double v : p.vec.values()) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite prototype");
    norm2 += v * v;
  }
  if (norm2 == 0.0) throw NumericError(std::string(what) + ": zero prototype");
}

ProbabilityMask two_class_softmax(const FeatureMap& query_features, const Prototype& p_fg,
                                  const Prototype& p_bg, double temperature, const char* what) {
  if (temperature <= 0.0) throw DataError(std::string(what) + ": temperature must be > 0");
  check_prototype_usable(p_fg, what);
  check_prototype_usable(p_bg, what);
  const Tensor sim_fg = cosine_map(query_features, p_fg.vec);
  const Tensor sim_bg = cosine_map(query_features, p_bg.vec);
  ProbabilityMask pm;
  // softmax over {tau*cos_fg, tau*cos_bg} == sigmoid(tau*(cos_fg - cos_bg))
  pm.logit = linear2(temperature, sim_fg, -temperature, sim_bg);
  pm.fg = sigmoid(pm.logit);
  pm.bg = affine(pm.fg, -1.0, 1.0);
  return pm;
}

}  // namespace

ProbabilityMask coarse_query_mask(const FeatureMap& query_features, const Prototype& p_fg,
                                  const Prototype& p_bg, double temperature) {
  return two_class_softmax(query_features, p_fg, p_bg, temperature, "coarse_query_mask");
}

double foreground_threshold(const RealGrid& fg_probabilities) {
  if (fg_probabilities.empty()) throw DataError("foreground_threshold: empty grid");
  double maxv = -1.0, sum = 0.0;
  for (double v : fg_probabilities.raw()) {
    if (v < 0.0 || v > 1.0)
      throw DataError("foreground_threshold: probability outside [0,1]");
    maxv = std::max(maxv, v);
    sum += v;
  }
  const double mean = sum / static_cast<double>(fg_probabilities.size());
  return (maxv + mean) / 2.0;
}

HardSelection hard_select(const ProbabilityMask& pm, double t_f, double t_b) {
  if (t_f < 0.0 || t_f > 1.0 || t_b < 0.0 || t_b > 1.0)
    throw DataError("hard_select: thresholds must lie in [0,1]");
  const int h = pm.fg.dim(0), w = pm.fg.dim(1);
  HardSelection sel;
  sel.t_f = t_f;
  sel.t_b = t_b;
  sel.fg = MaskGrid(h, w);
  sel.bg = MaskGrid(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const size_t i = static_cast<size_t>(r) * w + c;
      sel.fg(r, c) = pm.fg.values()[i] >= t_f ? 1 : 0;
      sel.bg(r, c) = pm.bg.values()[i] >= t_b ? 1 : 0;
    }
  return sel;
}

QueryPrototypes query_prototype(const FeatureMap& query_features, const HardSelection& sel) {
  QueryPrototypes out;
  auto pool_if_nonempty = [&](const MaskGrid& m, PrototypeRole role) -> std::optional<Prototype> {
    if (mask_area(m) == 0) return std::nullopt;
    RealGrid soft(m.rows(), m.cols());
    for (size_t i = 0; i < m.size(); ++i) soft.raw()[i] = m.raw()[i] ? 1.0 : 0.0;
    return masked_average_pool(query_features, soft, role);
  };
  out.fg = pool_if_nonempty(sel.fg, PrototypeRole::kQueryFg);
  out.bg = pool_if_nonempty(sel.bg, PrototypeRole::kQueryBg);
  return out;
}

Prototype fuse_prototypes(const Prototype& p_s, const Prototype& p_q, double alpha, double beta) {
  if (alpha < 0.0 || beta < 0.0 || std::abs(alpha + beta - 1.0) > 1e-9)
    throw DataError("fuse_prototypes: need alpha, beta >= 0 with alpha + beta = 1");
  if (p_s.vec.shape() != p_q.vec.shape())
    throw DataError("fuse_prototypes: dimension mismatch");
  PrototypeRole fused_role;
  if (p_s.role == PrototypeRole::kSupportFg && p_q.role == PrototypeRole::kQueryFg)
    fused_role = PrototypeRole::kFusedFg;
  else if (p_s.role == PrototypeRole::kSupportBg && p_q.role == PrototypeRole::kQueryBg)
    fused_role = PrototypeRole::kFusedBg;
  else
    throw DataError("fuse_prototypes: role mismatch (" + prototype_role_name(p_s.role) + " vs " +
                    prototype_role_name(p_q.role) + ")");
  Prototype p;
  p.vec = linear2(alpha, p_s.vec, beta, p_q.vec);
  p.role = fused_role;
  return p;
}

ProbabilityMask final_prediction(const FeatureMap& query_features, const Prototype& p_final_fg,
                                 const Prototype& p_final_bg, double temperature) {
  return two_class_softmax(query_features, p_final_fg, p_final_bg, temperature,
                           "final_prediction");
}

std::string diagnostics_to_json(const PipelineDiagnostics& diag) {
  nlohmann::json j;
  j["t_f"] = diag.t_f;
  j["fg_selected"] = diag.fg_selected;
  j["bg_selected"] = diag.bg_selected;
  j["fallback"] = diag.fallback;
  j["regions_per_shot"] = diag.regions_per_shot;
  return j.dump(2) + "\n";
}

PipelineResult sqpf_forward(const std::vector<SupportShot>& support,
                            const FeatureMap& query_features, const PipelineConfig& cfg,
                            const HardSelection* fixed_selection) {
  if (support.empty()) throw DataError("sqpf_forward: no support shots");

  PipelineResult res;

  // per-shot prototypes, then the K-shot average
  std::vector<Tensor> fg_protos, bg_protos;
  for (const auto& shot : support) {
    const RegionPartition part = partition_foreground(shot.fg_mask, cfg.n_regions);
    res.diag.regions_per_shot.push_back(static_cast<int>(part.regions.size()));
    fg_protos.push_back(support_prototype(shot.features, part).vec);
    bg_protos.push_back(background_prototype(shot.features, shot.fg_mask).vec);
  }
  res.support_fg = {mean_of(fg_protos), PrototypeRole::kSupportFg};
  res.support_bg = {mean_of(bg_protos), PrototypeRole::kSupportBg};

  res.coarse =
      coarse_query_mask(query_features, res.support_fg, res.support_bg, cfg.temperature);

  HardSelection sel;
  if (fixed_selection) {
    sel = *fixed_selection;
    res.diag.t_f = sel.t_f;
  } else {
    res.diag.t_f = foreground_threshold(res.coarse.fg.to_grid());
    sel = hard_select(res.coarse, res.diag.t_f, cfg.t_b);
  }
  res.diag.fg_selected = mask_area(sel.fg);
  res.diag.bg_selected = mask_area(sel.bg);

  const QueryPrototypes qp = query_prototype(query_features, sel);
  if (!qp.fg || !qp.bg) {
    // Eq. 7 is undefined on an empty selection; fall back to the coarse mask.
    res.diag.fallback = true;
    res.final_mask = res.coarse;
    return res;
  }
  res.query_fg = qp.fg;
  res.query_bg = qp.bg;

  res.fused_fg = fuse_prototypes(res.support_fg, *qp.fg, cfg.alpha, cfg.beta);
  res.fused_bg = fuse_prototypes(res.support_bg, *qp.bg, cfg.alpha, cfg.beta);
  res.final_mask =
      final_prediction(query_features, *res.fused_fg, *res.fused_bg, cfg.temperature);
  return res;
}

}  // namespace sqpf
