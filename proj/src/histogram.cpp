#include "histmix/histogram.h"

#include "histmix/errors.h"
#include "histmix/ops.h"

namespace histmix {
namespace {

constexpr double kMinMaskSum = 1e-6;

}  // namespace

std::vector<Var> bind_filter_bank(Graph& g, FilterBank& bank, bool trainable) {
  std::vector<Var> out;
  for (Parameter& k : bank.kernels) out.push_back(trainable ? g.parameter(k) : g.constant(k.value));
  return out;
}

Var mask_downsample(Graph& g, Var mask) {
  if (g.value(mask).rank() != 2) {
    throw DimensionError("mask_downsample: mask must be [H,W], got " + shape_str(g.value(mask).shape()));
  }
  return avgpool2(g, mask);
}

Tensor mask_downsample(const Tensor& mask) {
  Graph g;
  return g.value(mask_downsample(g, g.constant(mask)));
}

Var compute_histogram(Graph& g, Var image, Var mask, std::span<const Var> kernels,
                      const FilterBankConfig& config) {
  const Tensor& img = g.value(image);
  const Tensor& m = g.value(mask);
  if (img.rank() != 3 || img.dim(0) != 3) {
    throw DimensionError("compute_histogram: image must be [3,H,W], got " + shape_str(img.shape()));
  }
  if (m.rank() != 2 || m.dim(0) != img.dim(1) || m.dim(1) != img.dim(2)) {
    throw DimensionError("compute_histogram: mask " + shape_str(m.shape()) +
                         " does not match image spatial axes " + shape_str(img.shape()));
  }
  if (kernels.size() != config.layers.size()) {
    throw DimensionError("compute_histogram: " + std::to_string(kernels.size()) + " kernel tensors for " +
                         std::to_string(config.layers.size()) + " layers");
  }
  const std::size_t need = config.min_image_size();
  if (img.dim(1) < need || img.dim(2) < need) {
    throw DimensionError("compute_histogram: image spatial axes " + shape_str(img.shape()) +
                         " smaller than " + std::to_string(need) + " required by setting " +
                         to_string(config.setting));
  }
  double total = 0.0;
  for (double v : m.data()) total += v;
  if (total <= kMinMaskSum) throw DegenerateError("compute_histogram: degenerate mask (sum <= 1e-6)");

  std::vector<Var> parts;
  Var x = image;
  Var cur_mask = mask;
  for (std::size_t l = 0; l < kernels.size(); ++l) {
    if (l > 0) {
      x = maxpool2(g, x);
      cur_mask = mask_downsample(g, cur_mask);
    }
    x = relu(g, conv2d_valid(g, x, kernels[l]));
    cur_mask = crop_border(g, cur_mask, (config.layers[l].kernel_size - 1) / 2);
    const Var mask_sum = sum(g, cur_mask);
    if (g.value(mask_sum)[0] <= kMinMaskSum) {
      throw DegenerateError("compute_histogram: degenerate mask at layer " + std::to_string(l + 1));
    }
    parts.push_back(div_scalar(g, channel_sum(g, mul(g, x, cur_mask)), mask_sum));
  }
  return parts.size() == 1 ? parts.front() : concat(g, parts);
}

std::vector<double> histogram_values(const Tensor& image, const Tensor& mask, const FilterBank& bank) {
  Graph g;
  std::vector<Var> ks;
  for (const Parameter& k : bank.kernels) ks.push_back(g.constant(k.value));
  const Var h = compute_histogram(g, g.constant(image), g.constant(mask), ks, bank.config);
  const auto d = g.value(h).data();
  return {d.begin(), d.end()};
}

}  // namespace histmix
