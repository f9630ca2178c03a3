#include "histmix/training.h"

#include <cstdio>

#include "histmix/errors.h"
#include "histmix/histogram.h"

namespace histmix {
namespace {

void require_bound_to(const Optimizer& opt, const std::vector<const Parameter*>& expected, const char* what) {
  const auto& params = opt.params();
  bool ok = params.size() == expected.size();
  for (std::size_t i = 0; ok && i < params.size(); ++i) ok = params[i] == expected[i];
  if (!ok) throw ContractError(std::string("optimizer is not bound to exactly the ") + what);
}

std::vector<Var> embed_batch(Graph& g, const ContrastiveBatch& batch, Var appearance, const SceneParams& scene,
                             std::span<const Var> kernels, const FilterBankConfig& config,
                             std::size_t image_size) {
  std::vector<Var> out;
  out.reserve(2 * batch.size());
  for (const auto* half : {&batch.anchors, &batch.positives}) {
    for (const LatentCode& code : *half) {
      const RenderVars r = render(g, appearance, code, scene, image_size, image_size);
      out.push_back(compute_histogram(g, r.image, r.mask, kernels, config));
    }
  }
  return out;
}

}  // namespace

double step_filter(const ContrastiveBatch& batch, FilterBank& bank, const SceneParams& scene,
                   Optimizer& optimizer, const StepOptions& options) {
  std::vector<const Parameter*> expected;
  for (const Parameter& k : bank.kernels) expected.push_back(&k);
  require_bound_to(optimizer, expected, "filter bank");

  Graph g;
  const Var appearance = g.constant(scene.appearance.value);
  const std::vector<Var> kernels = bind_filter_bank(g, bank, true);
  const std::vector<Var> h = embed_batch(g, batch, appearance, scene, kernels, bank.config, options.image_size);
  const Var loss = nt_xent(g, h, batch.tau, options.symmetric);
  optimizer.zero_grad();
  g.backward(loss);
  optimizer.step();
  return g.value(loss)[0];
}

double step_hybrid(const ContrastiveBatch& batch, const FilterBank& bank, SceneParams& scene,
                   Optimizer& optimizer, const StepOptions& options) {
  require_bound_to(optimizer, {&scene.appearance}, "scene appearance parameters");

  Graph g;
  const Var appearance = g.parameter(scene.appearance);
  std::vector<Var> kernels;
  for (const Parameter& k : bank.kernels) kernels.push_back(g.constant(k.value));
  const std::vector<Var> h = embed_batch(g, batch, appearance, scene, kernels, bank.config, options.image_size);
  const Var loss = nt_xent(g, h, batch.tau, options.symmetric);
  optimizer.zero_grad();
  g.backward(loss);
  optimizer.step();
  return g.value(loss)[0];
}

void ScheduleConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size", "must be positive");
  if (!(tau > 0.0)) throw ConfigError("tau", "must be positive");
  if (hybrid_every < 1) throw ConfigError("hybrid_every", "must be positive");
  if (step.image_size < 32) throw ConfigError("image_size", "must be at least 32");
}

std::string loss_csv_row(const LossRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%llu,%s,%.17g,%.17g,%llu", static_cast<unsigned long long>(r.step),
                to_string(r.scheme).c_str(), r.loss, r.tau, static_cast<unsigned long long>(r.seed));
  return buf;
}

Trainer::Trainer(DomainPartition partition, FilterBank bank, SceneParams scene, OptimizerConfig filter_opt,
                 OptimizerConfig hybrid_opt, Rng rng)
    : partition_(std::move(partition)),
      bank_(std::move(bank)),
      scene_(std::move(scene)),
      filter_opt_(filter_opt, bank_.parameters()),
      hybrid_opt_(hybrid_opt, {&scene_.appearance}),
      rng_(std::move(rng)) {}

std::vector<LossRecord> Trainer::run(const ScheduleConfig& config, std::uint64_t iterations,
                                     const std::function<void(const Trainer&)>& after_iteration) {
  config.validate();
  std::vector<LossRecord> log;
  auto sample_base = [&] {
    std::vector<LatentCode> codes;
    codes.reserve(config.batch_size);
    for (std::size_t i = 0; i < config.batch_size; ++i) codes.push_back(sample_in_distribution(partition_, rng_));
    return codes;
  };
  for (std::uint64_t it = 0; it < iterations; ++it) {
    if (config.train_hybrid && (step_ + 1) % config.hybrid_every == 0) {
      const auto base = sample_base();
      const ContrastiveBatch batch = build_batch(PairScheme::Hybrid, base, partition_, rng_, config.tau);
      const double loss = step_hybrid(batch, bank_, scene_, hybrid_opt_, config.step);
      log.push_back({step_, PairScheme::Hybrid, loss, config.tau, config.seed});
    }
    // The filter batch is drawn even when the bank is frozen so both
    // variants see the same hybrid batches.
    const auto base = sample_base();
    const ContrastiveBatch batch = build_batch(PairScheme::Filter, base, partition_, rng_, config.tau);
    if (config.train_filters) {
      const double loss = step_filter(batch, bank_, scene_, filter_opt_, config.step);
      log.push_back({step_, PairScheme::Filter, loss, config.tau, config.seed});
    }
    ++step_;
    if (after_iteration) after_iteration(*this);
  }
  return log;
}

}  // namespace histmix
