#include "sqpf/loss.hpp"

namespace sqpf {

Tensor episode_loss(const ProbabilityMask& coarse, const ProbabilityMask& final_mask,
                    const RealGrid& gt, double lambda_coarse, double lambda_final) {
  if (lambda_coarse < 0.0 || lambda_final < 0.0)
    throw DataError("episode_loss: loss weights must be >= 0");
  for (const ProbabilityMask* pm : {&coarse, &final_mask}) {
    if (pm->fg.dim(0) != gt.rows() || pm->fg.dim(1) != gt.cols())
      throw DataError("episode_loss: mask/target shape mismatch");
    for (double p : pm->fg.values())
      if (p < 0.0 || p > 1.0) throw DataError("episode_loss: probability outside [0,1]");
  }
  const Tensor ce_final = bce_with_logits_mean(final_mask.logit, gt);
  const Tensor ce_coarse = bce_with_logits_mean(coarse.logit, gt);
  return linear2(lambda_final, ce_final, lambda_coarse, ce_coarse);
}

}  // namespace sqpf
