#pragma once

#include <span>
#include <string>
#include <vector>

#include "histmix/graph.h"
#include "histmix/rng.h"
#include "histmix/scene.h"

namespace histmix {

// FILTER positives differ from their anchor only in pose z; HYBRID positives
// differ only in shape x. Negatives are the remaining 2N-2 images in both.
enum class PairScheme { Filter, Hybrid };

std::string to_string(PairScheme scheme);

struct ContrastiveBatch {
  PairScheme scheme = PairScheme::Filter;
  std::vector<LatentCode> anchors;
  std::vector<LatentCode> positives;
  double tau = 0.5;

  std::size_t size() const noexcept { return anchors.size(); }
};

/// Pairs every base code with a positive. FILTER draws a fresh pose z' != z.
/// HYBRID draws x' != x uniformly from the other domain's shapes, or from all
/// other shapes when `cross_domain` is false. y and b are always kept.
/// Throws DegenerateError when HYBRID has no alternative shape to draw.
ContrastiveBatch build_batch(PairScheme scheme, std::span<const LatentCode> base_codes,
                             const DomainPartition& partition, Rng& rng, double tau,
                             bool cross_domain = true);

/// NT-Xent over 2N embeddings ordered [anchors; positives]; the positive of
/// row i is row (i + N) mod 2N and every other row is a negative.
///   l_i = -log( exp(sim(h_i,h_j)/tau) / sum_{k != i} exp(sim(h_i,h_k)/tau) )
/// The loss sums l_i over the N anchors, or over all 2N rows when
/// `symmetric`. Log-sum-exp uses max subtraction.
Var nt_xent(Graph& g, std::span<const Var> embeddings, double tau, bool symmetric = false);

// Plain evaluation of the same loss on raw vectors.
double nt_xent_value(std::span<const std::vector<double>> embeddings, double tau, bool symmetric = false);

}  // namespace histmix
