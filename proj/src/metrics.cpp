#include "histmix/metrics.h"

#include <algorithm>
#include <cmath>

#include "histmix/errors.h"
#include "histmix/mr8.h"
#include "histmix/rng.h"

namespace histmix {

std::vector<double> foreground_colors(const Tensor& image, const Tensor& mask) {
  if (image.rank() != 3 || mask.rank() != 2 || image.dim(1) != mask.dim(0) || image.dim(2) != mask.dim(1)) {
    throw DimensionError("foreground_colors: image " + shape_str(image.shape()) + " and mask " +
                         shape_str(mask.shape()) + " disagree on spatial axes");
  }
  const std::size_t c = image.dim(0), plane = mask.size();
  std::vector<double> out;
  for (std::size_t p = 0; p < plane; ++p) {
    if (mask[p] <= kForegroundThreshold) continue;
    for (std::size_t ch = 0; ch < c; ++ch) out.push_back(image[ch * plane + p]);
  }
  return out;
}

std::vector<double> foreground_responses(const Tensor& responses, const Tensor& mask) {
  if (responses.rank() != 3 || mask.rank() != 2) {
    throw DimensionError("foreground_responses: expected [C,H',W'] responses and [H,W] mask");
  }
  const std::size_t c = responses.dim(0), ho = responses.dim(1), wo = responses.dim(2);
  if (mask.dim(0) < ho || mask.dim(1) < wo || (mask.dim(0) - ho) % 2 || (mask.dim(1) - wo) % 2) {
    throw DimensionError("foreground_responses: mask " + shape_str(mask.shape()) + " cannot be centre-cropped to " +
                         std::to_string(ho) + "x" + std::to_string(wo));
  }
  const std::size_t off_i = (mask.dim(0) - ho) / 2, off_j = (mask.dim(1) - wo) / 2, plane = ho * wo;
  std::vector<double> out;
  for (std::size_t i = 0; i < ho; ++i) {
    for (std::size_t j = 0; j < wo; ++j) {
      if (mask.at(i + off_i, j + off_j) <= kForegroundThreshold) continue;
      for (std::size_t ch = 0; ch < c; ++ch) out.push_back(responses[ch * plane + i * wo + j]);
    }
  }
  return out;
}

namespace {

// Draws n_samples rows uniformly from the union of the per-image pools.
std::vector<double> sample_rows(const std::vector<std::vector<double>>& pools, std::size_t dim,
                                std::size_t n_samples, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& pool : pools) {
    offsets.push_back(total);
    total += pool.size() / dim;
  }
  if (total < k) {
    throw DegenerateError("codebook: " + std::to_string(total) + " pixels available, need at least k = " +
                          std::to_string(k));
  }
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n_samples * dim);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::size_t global = rng.index(total);
    const std::size_t img = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), global) -
                                                     offsets.begin()) - 1;
    const std::size_t row = global - offsets[img];
    out.insert(out.end(), pools[img].begin() + row * dim, pools[img].begin() + (row + 1) * dim);
  }
  return out;
}

std::vector<double> all_pixels(const Tensor& t) {
  const std::size_t c = t.dim(0), plane = t.size() / c;
  std::vector<double> out(t.size());
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t ch = 0; ch < c; ++ch) out[p * c + ch] = t[ch * plane + p];
  return out;
}

}  // namespace

KMeansResult build_color_codebook(std::span<const RenderOutput> images, PixelSource source, std::size_t n_samples,
                                  std::size_t k, std::uint64_t seed) {
  std::vector<std::vector<double>> pools;
  for (const RenderOutput& r : images) {
    pools.push_back(source == PixelSource::Foreground ? foreground_colors(r.image, r.mask) : all_pixels(r.image));
  }
  const std::vector<double> samples = sample_rows(pools, 3, n_samples, k, derive_seed(seed, "color-sample"));
  return kmeans(samples, 3, {k, 100, 1e-6, derive_seed(seed, "color-kmeans")});
}

KMeansResult build_texton_codebook(std::span<const RenderOutput> images, std::size_t n_samples, std::size_t k,
                                   std::uint64_t seed) {
  std::vector<std::vector<double>> pools;
  for (const RenderOutput& r : images) pools.push_back(all_pixels(mr8_responses(to_grayscale(r.image))));
  const std::vector<double> samples =
      sample_rows(pools, Mr8Bank::kNumResponses, n_samples, k, derive_seed(seed, "texton-sample"));
  return kmeans(samples, Mr8Bank::kNumResponses, {k, 100, 1e-6, derive_seed(seed, "texton-kmeans")});
}

std::vector<double> assign_histogram(std::span<const double> features, const Codebook& codebook) {
  if (codebook.dim == 0 || features.size() % codebook.dim != 0) {
    throw DimensionError("assign_histogram: feature buffer is not n x " + std::to_string(codebook.dim));
  }
  const std::size_t n = features.size() / codebook.dim;
  if (n == 0) throw DegenerateError("assign_histogram: degenerate mask (no foreground pixels)");
  std::vector<double> hist(codebook.k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    hist[nearest_center(codebook, features.subspan(i * codebook.dim, codebook.dim))] += 1.0;
  }
  for (double& v : hist) v /= static_cast<double>(n);
  return hist;
}

double chi2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("chi2_distance: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
                         " differ on axis 0");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d / (a[i] + b[i] + 1e-10);
  }
  return 0.5 * s;
}

Tensor stack_std(std::span<const Tensor> stack) {
  if (stack.empty()) throw DimensionError("stack_std: empty stack");
  const Tensor& first = stack.front();
  if (first.rank() != 3) throw DimensionError("stack_std: entries must be [C,H,W], got " + shape_str(first.shape()));
  for (const Tensor& t : stack) {
    if (t.shape() != first.shape()) throw DimensionError("stack_std: stack entries differ in shape");
  }
  const std::size_t c = first.dim(0), plane = first.dim(1) * first.dim(2);
  const double n = static_cast<double>(stack.size());
  Tensor out({first.dim(1), first.dim(2)});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < plane; ++p) {
      double mean = 0.0;
      for (const Tensor& t : stack) mean += t[ch * plane + p];
      mean /= n;
      double var = 0.0;
      for (const Tensor& t : stack) {
        const double d = t[ch * plane + p] - mean;
        var += d * d;
      }
      out[p] += std::sqrt(var / n) / static_cast<double>(c);
    }
  }
  return out;
}

IouScore shape_iou_score(const StackRenderer& render, std::span<const std::size_t> appearance_set, double threshold,
                         std::size_t n_splits, std::uint64_t seed) {
  if (appearance_set.size() < 4) throw ContractError("shape_iou_score: need at least 4 appearance codes");
  if (n_splits == 0) throw ContractError("shape_iou_score: need at least one split");
  std::vector<Tensor> renders;
  for (std::size_t y : appearance_set) renders.push_back(render(y));

  Rng rng(seed);
  IouScore score;
  std::vector<std::size_t> order(appearance_set.size());
  for (std::size_t s = 0; s < n_splits; ++s) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng.index(i + 1)]);
    const std::size_t half = order.size() / 2;
    std::vector<Tensor> s1, s2;
    for (std::size_t i = 0; i < order.size(); ++i) (i < half ? s1 : s2).push_back(renders[order[i]]);
    const Tensor m1 = stack_std(s1), m2 = stack_std(s2);
    std::size_t inter = 0, uni = 0;
    for (std::size_t p = 0; p < m1.size(); ++p) {
      const bool a = m1[p] > threshold, b = m2[p] > threshold;
      inter += a && b;
      uni += a || b;
    }
    double iou = 1.0;
    if (uni == 0) {
      ++score.degenerate_splits;
    } else {
      iou = static_cast<double>(inter) / static_cast<double>(uni);
    }
    score.per_split.push_back(iou);
  }
  for (double v : score.per_split) score.mean += v;
  score.mean /= static_cast<double>(n_splits);
  for (double v : score.per_split) score.std += (v - score.mean) * (v - score.mean);
  score.std = std::sqrt(score.std / static_cast<double>(n_splits));
  return score;
}

IouScore shape_iou_score(const SceneParams& scene, std::size_t x, std::span<const std::size_t> appearance_set,
                         const std::array<double, 2>& z, std::size_t b, std::size_t image_size, double threshold,
                         std::size_t n_splits, std::uint64_t seed) {
  StackRenderer r = [&](std::size_t y) {
    LatentCode code{x, y, b, z};
    return render(code, scene, image_size, image_size).image;
  };
  return shape_iou_score(r, appearance_set, threshold, n_splits, seed);
}

ResistivityReport resistivity_report(const GridRenderer& render, std::span<const std::size_t> shapes,
                                     std::span<const std::size_t> appearances) {
  if (appearances.size() < 2) throw ContractError("resistivity_report: need at least 2 appearance codes");
  ResistivityReport report;
  report.histogram.assign(ResistivityReport::kBins, 0);
  for (std::size_t x : shapes) {
    std::vector<Tensor> stack;
    for (std::size_t y : appearances) stack.push_back(render(x, y));
    Tensor heat = stack_std(stack);
    for (double v : heat.data()) {
      const double pos = v / ResistivityReport::kRange * static_cast<double>(ResistivityReport::kBins);
      const std::size_t bin = std::min(ResistivityReport::kBins - 1, static_cast<std::size_t>(std::max(0.0, pos)));
      ++report.histogram[bin];
    }
    report.heatmaps.push_back(std::move(heat));
  }
  return report;
}

}  // namespace histmix
