#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "histmix/kmeans.h"
#include "histmix/scene.h"
#include "histmix/tensor.h"

namespace histmix {

inline constexpr double kForegroundThreshold = 0.5;

enum class PixelSource { WholeImage, Foreground };

// Colours of pixels with mask > 0.5, n x 3 row-major.
std::vector<double> foreground_colors(const Tensor& image, const Tensor& mask);
// 8-d response vectors at foreground pixels. The mask is centre-cropped to
// the (smaller) response grid.
std::vector<double> foreground_responses(const Tensor& responses, const Tensor& mask);

/// Colour codebook from `n_samples` RGB values drawn uniformly (with
/// replacement) over the pixels of `images`.
KMeansResult build_color_codebook(std::span<const RenderOutput> images, PixelSource source,
                                  std::size_t n_samples = 50000, std::size_t k = 50, std::uint64_t seed = 0);

/// Texton codebook: same sampling over the 8-d MR8 responses of the
/// grayscale images.
KMeansResult build_texton_codebook(std::span<const RenderOutput> images, std::size_t n_samples = 50000,
                                   std::size_t k = 50, std::uint64_t seed = 0);

/// Nearest-centre counts over `features` (n x dim), normalised to sum 1.
/// Throws DegenerateError on an empty feature set.
std::vector<double> assign_histogram(std::span<const double> features, const Codebook& codebook);

// 0.5 * sum (a_i - b_i)^2 / (a_i + b_i + 1e-10).
double chi2_distance(std::span<const double> a, std::span<const double> b);

// Per-pixel standard deviation across the stack, computed per channel and
// averaged over channels. Stack entries are [C,H,W]; result [H,W].
Tensor stack_std(std::span<const Tensor> stack);

struct IouScore {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> per_split;
  std::size_t degenerate_splits = 0;  // both masks empty, scored 1.0
};

// Renders G(x, y, z, b) for appearance index y with everything else fixed.
using StackRenderer = std::function<Tensor(std::size_t appearance)>;

/// Shape-disentanglement IoU: split the appearance set S in two at random,
/// threshold the std image of each half's stack, take the IoU of the two
/// binary masks; repeat `n_splits` times. Requires |S| >= 4.
IouScore shape_iou_score(const StackRenderer& render, std::span<const std::size_t> appearance_set,
                         double threshold = 0.2, std::size_t n_splits = 10, std::uint64_t seed = 0);

IouScore shape_iou_score(const SceneParams& scene, std::size_t x, std::span<const std::size_t> appearance_set,
                         const std::array<double, 2>& z, std::size_t b, std::size_t image_size,
                         double threshold = 0.2, std::size_t n_splits = 10, std::uint64_t seed = 0);

struct ResistivityReport {
  std::vector<Tensor> heatmaps;  // one [H,W] std heatmap per shape
  std::vector<std::uint64_t> histogram;  // 64 bins over [0, 0.5]; larger values land in the last bin
  static constexpr std::size_t kBins = 64;
  static constexpr double kRange = 0.5;
};

// G(x, y) for the resistivity sweep; pose and background are the caller's choice per shape.
using GridRenderer = std::function<Tensor(std::size_t shape, std::size_t appearance)>;

ResistivityReport resistivity_report(const GridRenderer& render, std::span<const std::size_t> shapes,
                                     std::span<const std::size_t> appearances);

}  // namespace histmix
