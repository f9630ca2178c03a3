#pragma once

#include <vector>

#include "histmix/tensor.h"

namespace histmix {

/// Maximum-response filter bank: 38 kernels of support 49x49.
///   0..17   edge (first derivative), scales (1,3),(2,6),(4,12) x 6 orientations
///   18..35  bar (second derivative), same layout
///   36      Gaussian, sigma 10
///   37      Laplacian of Gaussian, sigma 10
/// Edge, bar and LoG kernels are zero-mean; every kernel has unit L1 norm.
class Mr8Bank {
 public:
  static constexpr std::size_t kSupport = 49;
  static constexpr std::size_t kNumKernels = 38;
  static constexpr std::size_t kNumResponses = 8;
  static constexpr std::size_t kScales = 3;
  static constexpr std::size_t kOrientations = 6;

  Mr8Bank();

  // [38, 49, 49]
  const Tensor& kernels() const noexcept { return kernels_; }

  /// Valid-mode cross-correlation of a [H,W] grayscale image with all 38
  /// kernels, reduced to 8 channels: max over orientations for each
  /// (type, scale) (absolute value for edges), then Gaussian and LoG. Channel order is
  /// [edge s1..s3, bar s1..s3, Gaussian, LoG]. Output [8, H-48, W-48].
  Tensor responses(const Tensor& gray) const;

 private:
  Tensor kernels_;
};

// Process-wide bank instance (the kernels are fixed).
const Mr8Bank& mr8_bank();

Tensor mr8_responses(const Tensor& gray);

// Luma 0.299 R + 0.587 G + 0.114 B of a [3,H,W] image.
Tensor to_grayscale(const Tensor& image);

}  // namespace histmix
