#include "histmix/mr8.h"

#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "histmix/errors.h"

namespace histmix {
namespace {

constexpr int kHalf = static_cast<int>(Mr8Bank::kSupport / 2);

// Gaussian 1-D profile or its first/second derivative at x.
double gauss1d(double sigma, double x, int order) {
  const double var = sigma * sigma;
  const double g = std::exp(-x * x / (2.0 * var)) / std::sqrt(std::numbers::pi * 2.0 * var);
  switch (order) {
    case 1: return -g * x / var;
    case 2: return g * (x * x - var) / (var * var);
    default: return g;
  }
}

void normalise(std::span<double> k, bool zero_mean) {
  if (zero_mean) {
    double mean = 0.0;
    for (double v : k) mean += v;
    mean /= static_cast<double>(k.size());
    for (double& v : k) v -= mean;
  }
  double l1 = 0.0;
  for (double v : k) l1 += std::abs(v);
  for (double& v : k) v /= l1;
}

}  // namespace

Mr8Bank::Mr8Bank() : kernels_({kNumKernels, kSupport, kSupport}) {
  constexpr std::size_t area = kSupport * kSupport;
  const double scales[kScales] = {1.0, 2.0, 4.0};
  auto slot = [&](std::size_t idx) { return std::span<double>(kernels_.ptr() + idx * area, area); };

  for (std::size_t s = 0; s < kScales; ++s) {
    for (std::size_t o = 0; o < kOrientations; ++o) {
      const double angle = std::numbers::pi * static_cast<double>(o) / static_cast<double>(kOrientations);
      const double c = std::cos(angle), sn = std::sin(angle);
      for (int order = 1; order <= 2; ++order) {
        auto k = slot((order == 1 ? 0 : kScales * kOrientations) + s * kOrientations + o);
        for (int i = -kHalf; i <= kHalf; ++i) {
          for (int j = -kHalf; j <= kHalf; ++j) {
            // Column offset j is x, row offset i is y; elongated along the rotated x axis.
            const double rx = c * j - sn * i;
            const double ry = sn * j + c * i;
            k[(i + kHalf) * kSupport + (j + kHalf)] = gauss1d(3.0 * scales[s], rx, 0) * gauss1d(scales[s], ry, order);
          }
        }
        normalise(k, true);
      }
    }
  }

  constexpr double sigma = 10.0;
  auto gauss = slot(36);
  auto log = slot(37);
  double gsum = 0.0;
  for (int i = -kHalf; i <= kHalf; ++i) {
    for (int j = -kHalf; j <= kHalf; ++j) {
      const double r2 = static_cast<double>(i * i + j * j);
      const double g = std::exp(-r2 / (2.0 * sigma * sigma));
      gauss[(i + kHalf) * kSupport + (j + kHalf)] = g;
      log[(i + kHalf) * kSupport + (j + kHalf)] = g * (r2 - 2.0 * sigma * sigma) / std::pow(sigma, 4);
      gsum += g;
    }
  }
  for (double& v : gauss) v /= gsum;
  normalise(gauss, false);
  normalise(log, true);
}

Tensor Mr8Bank::responses(const Tensor& gray) const {
  if (gray.rank() != 2) throw DimensionError("mr8_responses: expected [H,W], got " + shape_str(gray.shape()));
  const std::size_t h = gray.dim(0), w = gray.dim(1);
  if (h < kSupport || w < kSupport) {
    throw DimensionError("mr8_responses: spatial axes " + shape_str(gray.shape()) + " smaller than kernel support " +
                         std::to_string(kSupport));
  }
  const std::size_t ho = h - kSupport + 1, wo = w - kSupport + 1;
  constexpr std::size_t area = kSupport * kSupport;

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatrix cols(area, ho * wo);
  for (std::size_t ki = 0; ki < kSupport; ++ki)
    for (std::size_t kj = 0; kj < kSupport; ++kj)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) cols(ki * kSupport + kj, i * wo + j) = gray.at(i + ki, j + kj);
  const RowMatrix full = Eigen::Map<const RowMatrix>(kernels_.ptr(), kNumKernels, area) * cols;

  Tensor out({kNumResponses, ho, wo});
  const std::size_t plane = ho * wo;
  for (std::size_t type = 0; type < 2; ++type) {
    for (std::size_t s = 0; s < kScales; ++s) {
      const std::size_t base = type * kScales * kOrientations + s * kOrientations;
      for (std::size_t p = 0; p < plane; ++p) {
        // Edge kernels are odd and orientations only span half a turn, so their sign is dropped.
        auto value = [&](std::size_t o) { return type == 0 ? std::abs(full(base + o, p)) : full(base + o, p); };
        double best = value(0);
        for (std::size_t o = 1; o < kOrientations; ++o) best = std::max(best, value(o));
        out[(type * kScales + s) * plane + p] = best;
      }
    }
  }
  for (std::size_t p = 0; p < plane; ++p) {
    out[6 * plane + p] = full(36, p);
    out[7 * plane + p] = full(37, p);
  }
  return out;
}

const Mr8Bank& mr8_bank() {
  static const Mr8Bank bank;
  return bank;
}

Tensor mr8_responses(const Tensor& gray) { return mr8_bank().responses(gray); }

Tensor to_grayscale(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw DimensionError("to_grayscale: expected [3,H,W], got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(1), w = image.dim(2), plane = h * w;
  Tensor out({h, w});
  for (std::size_t p = 0; p < plane; ++p) {
    out[p] = 0.299 * image[p] + 0.587 * image[plane + p] + 0.114 * image[2 * plane + p];
  }
  return out;
}

}  // namespace histmix
