#include "histmix/optimizer.h"

#include <cmath>

#include "histmix/errors.h"

namespace histmix {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("optimizer", "expected \"sgd\" or \"adam\", got \"" + name + "\"");
}

Optimizer::Optimizer(OptimizerConfig config, std::vector<Parameter*> params)
    : config_(config), params_(std::move(params)) {
  for (Parameter* p : params_) {
    first_.push_back(Tensor::zeros_like(p->value));
    if (config_.kind == OptimizerKind::Adam) second_.push_back(Tensor::zeros_like(p->value));
  }
}

void Optimizer::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Optimizer::step() {
  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::Sgd) {
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& v = first_[k];
      Parameter& p = *params_[k];
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = config_.momentum * v[i] + p.grad[i];
        p.value[i] -= lr * v[i];
      }
    }
    return;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& m = first_[k];
    Tensor& s = second_[k];
    Parameter& p = *params_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = p.grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      s[i] = b2 * s[i] + (1.0 - b2) * gi * gi;
      p.value[i] -= lr * (m[i] / c1) / (std::sqrt(s[i] / c2) + config_.epsilon);
    }
  }
}

std::vector<Tensor> Optimizer::slots() const {
  std::vector<Tensor> out = first_;
  out.insert(out.end(), second_.begin(), second_.end());
  return out;
}

void Optimizer::load_slots(const std::vector<Tensor>& slots, std::uint64_t steps) {
  if (slots.size() != first_.size() + second_.size()) {
    throw FormatError("optimizer state has " + std::to_string(slots.size()) + " slots, expected " +
                      std::to_string(first_.size() + second_.size()));
  }
  for (std::size_t k = 0; k < slots.size(); ++k) {
    Tensor& dst = k < first_.size() ? first_[k] : second_[k - first_.size()];
    if (dst.shape() != slots[k].shape()) {
      throw FormatError("optimizer slot " + std::to_string(k) + " has shape " +
                        shape_str(slots[k].shape()) + ", expected " + shape_str(dst.shape()));
    }
    dst = slots[k];
  }
  steps_ = steps;
}

}  // namespace histmix
