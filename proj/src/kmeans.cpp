#include "histmix/kmeans.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "histmix/errors.h"
#include "histmix/rng.h"

namespace histmix {
namespace {

double sq_dist(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double t = a[d] - b[d];
    s += t * t;
  }
  return s;
}

}  // namespace

std::size_t nearest_center(const Codebook& codebook, std::span<const double> point) {
  if (point.size() != codebook.dim) {
    throw DimensionError("nearest_center: point has " + std::to_string(point.size()) + " dims, codebook " +
                         std::to_string(codebook.dim));
  }
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < codebook.k; ++c) {
    const double d = sq_dist(point.data(), codebook.centers.data() + c * codebook.dim, codebook.dim);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansOptions& options) {
  if (dim == 0 || points.size() % dim != 0) throw DimensionError("kmeans: point buffer is not n x dim");
  const std::size_t n = points.size() / dim;
  const std::size_t k = options.k;
  if (k < 2) throw ContractError("kmeans: k must be at least 2");
  if (n < k) {
    throw DegenerateError("kmeans: " + std::to_string(n) + " points available, need at least k = " +
                          std::to_string(k));
  }
  const double* p = points.data();
  KMeansResult result;
  Codebook& cb = result.codebook;
  cb.k = k;
  cb.dim = dim;
  cb.centers.assign(k * dim, 0.0);

  // k-means++ seeding.
  Rng rng(options.seed);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = rng.index(n);
  bool reduced = false;
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(p + chosen * dim, dim, cb.centers.begin() + c * dim);
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], sq_dist(p + i * dim, cb.centers.data() + c * dim, dim));
      total += d2[i];
    }
    if (total <= 0.0) {
      reduced = true;  // every point coincides with a chosen centre
      continue;
    }
    double target = rng.uniform() * total;
    chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0 && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    while (d2[chosen] <= 0.0) --chosen;
  }
  if (reduced) {
    result.warnings.push_back("reduced-k: fewer than " + std::to_string(k) +
                              " distinct points; surplus centres are duplicates");
  }

  std::vector<std::size_t> assign(n, 0);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = nearest_center(cb, {p + i * dim, dim});
      inertia += sq_dist(p + i * dim, cb.centers.data() + assign[i] * dim, dim);
    }
    result.inertia.push_back(inertia);
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[assign[i] * dim + d] += p[i * dim + d];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double moved = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double updated = sums[c * dim + d] / static_cast<double>(counts[c]);
        const double delta = updated - cb.centers[c * dim + d];
        moved += delta * delta;
        cb.centers[c * dim + d] = updated;
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    result.iterations = iter + 1;
    if (shift <= options.tolerance) break;
  }
  return result;
}

}  // namespace histmix
