#pragma once

#include <span>
#include <vector>

#include "histmix/filter_bank.h"
#include "histmix/graph.h"

namespace histmix {

// Binds the bank's kernels into `g`: as trainable parameters when
// `trainable`, otherwise as constants that receive no gradient.
std::vector<Var> bind_filter_bank(Graph& g, FilterBank& bank, bool trainable);

// 2x2 average pooling of an [H,W] mask.
Var mask_downsample(Graph& g, Var mask);
Tensor mask_downsample(const Tensor& mask);

/// Masked feature histogram of `image` [3,H,W] under `mask` [H,W].
///
/// Per layer: valid convolution, ReLU, multiply by the mask cropped to the
/// response grid, sum each channel, divide by that mask's sum. Between layers
/// the responses are max-pooled and the mask average-pooled. The per-layer
/// vectors are concatenated. Differentiable w.r.t. image, mask and kernels.
///
/// Throws DegenerateError when a mask sums to <= 1e-6 and DimensionError when
/// the image is too small for the deepest layer.
Var compute_histogram(Graph& g, Var image, Var mask, std::span<const Var> kernels,
                      const FilterBankConfig& config);

// Convenience evaluation without gradients.
std::vector<double> histogram_values(const Tensor& image, const Tensor& mask, const FilterBank& bank);

}  // namespace histmix
