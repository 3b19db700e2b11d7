#pragma once
// Gradient and perturbation saliency baselines over the pretrained policy's
// actor head.

#include "rlinrl/policy.hpp"

namespace rlinrl {

// |d head / d s| summed over channels and (continuous) action dims,
// max-normalized to [0,1]. Shape [H,W].
Tensor jacobian_saliency(PolicyNetwork& pre, const Tensor& s);

struct PerturbationConfig {
  float sigma = 1.5f;  // blur width in cells
  int radius = 2;      // disk radius of the perturbed patch
  int stride = 1;
};

// Blur-disk substitution saliency: score(i,j) = 0.5 * ||head(s) -
// head(s_perturbed at i,j)||^2, evaluated on a stride grid, bilinearly
// upsampled, max-normalized. Shape [H,W].
Tensor perturbation_saliency(PolicyNetwork& pre, const Tensor& s, const PerturbationConfig& cfg);

// Gaussian blur of each channel, reflect-padded; exposed for tests.
Tensor gaussian_blur(const Tensor& s, float sigma);

// Binarize a saliency map into a [1,H,W,1] mask keeping the cells that hold
// the top-q fraction of total mass.
Tensor saliency_to_mask(const Tensor& map, float q);

}  // namespace rlinrl
