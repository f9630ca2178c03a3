#include "histmix/contrastive.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "histmix/errors.h"

namespace histmix {

std::string to_string(PairScheme scheme) { return scheme == PairScheme::Filter ? "filter" : "hybrid"; }

ContrastiveBatch build_batch(PairScheme scheme, std::span<const LatentCode> base_codes,
                             const DomainPartition& partition, Rng& rng, double tau, bool cross_domain) {
  if (base_codes.empty()) throw ContractError("build_batch: need at least one base code");
  if (!(tau > 0.0)) throw ContractError("build_batch: tau must be positive");
  ContrastiveBatch batch;
  batch.scheme = scheme;
  batch.tau = tau;
  batch.anchors.assign(base_codes.begin(), base_codes.end());
  for (const LatentCode& anchor : base_codes) {
    LatentCode pos = anchor;
    if (scheme == PairScheme::Filter) {
      do {
        pos.z = sample_pose(rng);
      } while (pos.z == anchor.z);
    } else {
      std::vector<std::size_t> pool;
      if (cross_domain) {
        pool = partition.other_domain_shapes(anchor.x);
      } else {
        for (std::size_t x = 0; x < partition.spec.n_x; ++x) {
          if (x != anchor.x) pool.push_back(x);
        }
      }
      if (pool.empty()) throw DegenerateError("build_batch: insufficient shape diversity for HYBRID pairs");
      pos.x = pool[rng.index(pool.size())];
    }
    batch.positives.push_back(pos);
  }
  return batch;
}

namespace {

struct NtXentForward {
  double loss = 0.0;
  std::vector<double> unit;   // [2N, k] normalised rows
  std::vector<double> norms;  // [2N]
  std::vector<double> coef;   // [2N, 2N] dloss/dS
};

NtXentForward nt_xent_forward(const std::vector<const Tensor*>& rows, double tau, bool symmetric) {
  const std::size_t m = rows.size();
  if (m < 2 || m % 2 != 0) {
    throw DimensionError("nt_xent: need an even number (>= 2) of embeddings, got " + std::to_string(m));
  }
  if (!(tau > 0.0)) throw ContractError("nt_xent: tau must be positive");
  const std::size_t k = rows[0]->size();
  const std::size_t n = m / 2;
  NtXentForward f;
  f.unit.resize(m * k);
  f.norms.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Tensor& r = *rows[i];
    if (r.rank() != 1 || r.size() != k) {
      throw DimensionError("nt_xent: embedding " + std::to_string(i) + " has shape " + shape_str(r.shape()) +
                           ", expected [" + std::to_string(k) + "]");
    }
    double ss = 0.0;
    for (double v : r.data()) ss += v * v;
    const double norm = std::sqrt(ss);
    if (norm < 1e-12) throw DegenerateError("nt_xent: degenerate embedding norm at row " + std::to_string(i));
    f.norms[i] = norm;
    for (std::size_t d = 0; d < k; ++d) f.unit[i * k + d] = r[d] / norm;
  }
  std::vector<double> sim(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < k; ++d) dot += f.unit[i * k + d] * f.unit[j * k + d];
      sim[i * m + j] = sim[j * m + i] = dot / tau;
    }
  }
  f.coef.assign(m * m, 0.0);
  const std::size_t rows_in_loss = symmetric ? m : n;
  for (std::size_t i = 0; i < rows_in_loss; ++i) {
    const std::size_t pos = (i + n) % m;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) mx = std::max(mx, sim[i * m + j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) z += std::exp(sim[i * m + j] - mx);
    }
    f.loss += -sim[i * m + pos] + mx + std::log(z);
    for (std::size_t j = 0; j < m; ++j) {
      if (j != i) f.coef[i * m + j] = std::exp(sim[i * m + j] - mx) / z;
    }
    f.coef[i * m + pos] -= 1.0;
  }
  return f;
}

}  // namespace

Var nt_xent(Graph& g, std::span<const Var> embeddings, double tau, bool symmetric) {
  std::vector<const Tensor*> rows;
  for (Var v : embeddings) rows.push_back(&g.value(v));
  NtXentForward f = nt_xent_forward(rows, tau, symmetric);
  const std::size_t m = rows.size();
  const std::size_t k = rows[0]->size();
  std::vector<Var> inputs(embeddings.begin(), embeddings.end());
  const double loss = f.loss;
  return g.record(Tensor::scalar(loss), inputs,
                  [inputs, f = std::move(f), m, k, tau](Graph& gr, const Tensor& dy) {
                    // dL/du_i = sum_j (c_ij + c_ji) u_j / tau, then project out u_i and scale by 1/|h_i|.
                    const double d = dy[0];
                    std::vector<double> du(k);
                    for (std::size_t i = 0; i < m; ++i) {
                      if (!gr.requires_grad(inputs[i])) continue;
                      std::fill(du.begin(), du.end(), 0.0);
                      for (std::size_t j = 0; j < m; ++j) {
                        const double c = f.coef[i * m + j] + f.coef[j * m + i];
                        if (c == 0.0) continue;
                        for (std::size_t t = 0; t < k; ++t) du[t] += c * f.unit[j * k + t];
                      }
                      double radial = 0.0;
                      for (std::size_t t = 0; t < k; ++t) radial += du[t] * f.unit[i * k + t];
                      Tensor& dh = gr.grad_buffer(inputs[i]);
                      const double s = d / (tau * f.norms[i]);
                      for (std::size_t t = 0; t < k; ++t) dh[t] += s * (du[t] - radial * f.unit[i * k + t]);
                    }
                  });
}

double nt_xent_value(std::span<const std::vector<double>> embeddings, double tau, bool symmetric) {
  std::vector<Tensor> owned;
  for (const auto& e : embeddings) owned.push_back(Tensor::vector(e));
  std::vector<const Tensor*> rows;
  for (const Tensor& t : owned) rows.push_back(&t);
  return nt_xent_forward(rows, tau, symmetric).loss;
}

}  // namespace histmix
