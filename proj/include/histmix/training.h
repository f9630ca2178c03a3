#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "histmix/contrastive.h"
#include "histmix/filter_bank.h"
#include "histmix/optimizer.h"
#include "histmix/scene.h"

namespace histmix {

// Renders both halves of `batch` and returns the 2N histograms' NT-Xent.
struct StepOptions {
  std::size_t image_size = 64;
  bool symmetric = false;
};

/// One gradient step of the filter objective: only the bank's kernels move.
/// `optimizer` must be bound to exactly the bank's parameters. The scene is
/// taken by const reference and rendered as constants.
double step_filter(const ContrastiveBatch& batch, FilterBank& bank, const SceneParams& scene,
                   Optimizer& optimizer, const StepOptions& options = {});

/// One gradient step of the hybrid objective: only the scene's appearance
/// parameters move; `optimizer` must be bound to exactly that parameter.
double step_hybrid(const ContrastiveBatch& batch, const FilterBank& bank, SceneParams& scene,
                   Optimizer& optimizer, const StepOptions& options = {});

struct ScheduleConfig {
  std::size_t batch_size = 24;
  double tau = 0.5;
  std::size_t hybrid_every = 4;  // a hybrid step on every hybrid_every-th iteration
  bool train_filters = true;     // false keeps the bank at its random initialisation
  bool train_hybrid = true;
  StepOptions step;
  std::uint64_t seed = 0;  // echoed into the log

  void validate() const;
};

struct LossRecord {
  std::uint64_t step = 0;
  PairScheme scheme = PairScheme::Filter;
  double loss = 0.0;
  double tau = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kLossCsvHeader = "step,scheme,loss,tau,seed";
std::string loss_csv_row(const LossRecord& record);

/// Owns everything a training run mutates. Optimizers hold pointers into the
/// bank and scene, so a Trainer is neither copyable nor movable.
class Trainer {
 public:
  Trainer(DomainPartition partition, FilterBank bank, SceneParams scene, OptimizerConfig filter_opt,
          OptimizerConfig hybrid_opt, Rng rng);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// Runs `iterations` schedule iterations. Within an iteration the hybrid
  /// step (when due: (step + 1) % hybrid_every == 0) precedes the filter step.
  std::vector<LossRecord> run(const ScheduleConfig& config, std::uint64_t iterations,
                              const std::function<void(const Trainer&)>& after_iteration = {});

  const DomainPartition& partition() const noexcept { return partition_; }
  FilterBank& bank() noexcept { return bank_; }
  const FilterBank& bank() const noexcept { return bank_; }
  SceneParams& scene() noexcept { return scene_; }
  const SceneParams& scene() const noexcept { return scene_; }
  Optimizer& filter_optimizer() noexcept { return filter_opt_; }
  const Optimizer& filter_optimizer() const noexcept { return filter_opt_; }
  Optimizer& hybrid_optimizer() noexcept { return hybrid_opt_; }
  const Optimizer& hybrid_optimizer() const noexcept { return hybrid_opt_; }
  Rng& rng() noexcept { return rng_; }
  const Rng& rng() const noexcept { return rng_; }
  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t step) noexcept { step_ = step; }

 private:
  DomainPartition partition_;
  FilterBank bank_;
  SceneParams scene_;
  Optimizer filter_opt_;
  Optimizer hybrid_opt_;
  Rng rng_;
  std::uint64_t step_ = 0;
};

}  // namespace histmix
