#pragma once

#include "sqpf/prototype.hpp"
#include "sqpf/tensor.hpp"

namespace sqpf {

// Weighted pixel-mean binary cross-entropy on both pipeline heads:
// lambda_final * CE(final, gt) + lambda_coarse * CE(coarse, gt).
// The target is the ground-truth soft mask at feature resolution.
// Differentiable when the masks carry live graphs; computed from the stored
// logits, which is the same function of the probabilities in a numerically
// safe form.
Tensor episode_loss(const ProbabilityMask& coarse, const ProbabilityMask& final_mask,
                    const RealGrid& gt, double lambda_coarse, double lambda_final);

}  // namespace sqpf
