#pragma once

#include <functional>
#include <span>
#include <string>

#include "histmix/graph.h"

namespace histmix {

struct GradCheckOptions {
  double step = 1e-4;       // central-difference step h, must lie in (0, 1e-2]
  double tolerance = 1e-4;  // max allowed relative error
  // Negative control: perturbs the analytic gradient before comparison.
  bool corrupt_gradient = false;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  bool pass = true;
  std::size_t checked = 0;
  std::string worst;  // "param#k[i]" of the worst element
};

// Builds a scalar loss from graph-bound parameters (same order as `params`).
using GraphBuilder = std::function<Var(Graph&, std::span<const Var>)>;

/// Compares reverse-mode gradients with central finite differences, element
/// by element: rel_err = |a - n| / max(1e-8, |a| + |n|). The builder must be
/// deterministic. A non-finite loss raises NumericError.
GradCheckReport grad_check(const GraphBuilder& build, std::span<Parameter* const> params,
                           const GradCheckOptions& options = {});

}  // namespace histmix
