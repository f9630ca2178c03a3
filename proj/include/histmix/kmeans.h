#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace histmix {

// k cluster centres in a dim-dimensional feature space, row-major.
struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<double> centers;

  std::span<const double> center(std::size_t i) const { return {centers.data() + i * dim, dim}; }
};

struct KMeansOptions {
  std::size_t k = 50;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;  // stop once no centre moves farther than this
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Codebook codebook;
  std::vector<double> inertia;  // within-cluster sum of squares per Lloyd iteration
  std::size_t iterations = 0;
  std::vector<std::string> warnings;
};

/// Lloyd's algorithm with k-means++ seeding over `points` (n x dim,
/// row-major). When fewer than k distinct points exist the surplus centres
/// duplicate existing ones and a reduced-k warning is recorded. Empty clusters
/// keep their previous centre.
KMeansResult kmeans(std::span<const double> points, std::size_t dim, const KMeansOptions& options);

// Index of the nearest centre by Euclidean distance; ties go to the lowest index.
std::size_t nearest_center(const Codebook& codebook, std::span<const double> point);

}  // namespace histmix
