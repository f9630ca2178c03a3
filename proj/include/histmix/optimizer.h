#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "histmix/graph.h"

namespace histmix {

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double learning_rate = 1e-2;
  double momentum = 0.9;  // SGD only
  double beta1 = 0.5;     // Adam only
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First-order optimizer over a fixed set of parameters. SGD keeps one
// velocity slot per parameter; Adam keeps two moment slots and a step count.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Parameter*> params);

  void zero_grad();
  void step();

  const OptimizerConfig& config() const noexcept { return config_; }
  const std::vector<Parameter*>& params() const noexcept { return params_; }

  // Slot tensors in parameter order: [first...] then (Adam) [second...].
  std::vector<Tensor> slots() const;
  void load_slots(const std::vector<Tensor>& slots, std::uint64_t steps);
  std::uint64_t steps() const noexcept { return steps_; }

 private:
  OptimizerConfig config_;
  std::vector<Parameter*> params_;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
  std::uint64_t steps_ = 0;
};

}  // namespace histmix
