#include "histmix/grad_check.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "histmix/errors.h"

namespace histmix {
namespace {

double evaluate(const GraphBuilder& build, std::span<Parameter* const> params, bool differentiate) {
  Graph g;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (Parameter* p : params) vars.push_back(differentiate ? g.parameter(*p) : g.constant(p->value));
  const Var loss = build(g, vars);
  const Tensor& v = g.value(loss);
  if (!v.is_scalar()) throw ContractError("grad_check: builder must return a scalar");
  if (!std::isfinite(v[0])) throw NumericError("grad_check: non-finite loss");
  if (differentiate) g.backward(loss);
  return v[0];
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& build, std::span<Parameter* const> params,
                           const GradCheckOptions& options) {
  const double h = options.step;
  if (!(h > 0.0 && h <= 1e-2)) throw ContractError("grad_check: step must lie in (0, 1e-2]");

  for (Parameter* p : params) p->zero_grad();
  evaluate(build, params, true);
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);
  if (options.corrupt_gradient && !analytic.empty() && analytic[0].size() > 0) {
    analytic[0][0] += 1e-2 * (1.0 + std::abs(analytic[0][0]));
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k]->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = evaluate(build, params, false);
      value[i] = saved - h;
      const double down = evaluate(build, params, false);
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++report.checked;
      if (report.worst.empty() || rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = "param#" + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  report.pass = report.max_rel_err < options.tolerance;
  return report;
}

}  // namespace histmix
