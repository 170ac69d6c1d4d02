#include "cmta/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "cmta/errors.hpp"

namespace cmta::ad {

namespace {
double evaluate(const ScalarFn& f, const std::vector<Tensor*>& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (Tensor* p : params) leaves.push_back(tape.leaf_ref(*p));
  const double loss = f(tape, leaves).value()[0];
  if (!std::isfinite(loss)) throw NonFiniteError("grad_check: loss is not finite");
  return loss;
}
}  // namespace

GradCheckResult grad_check(const ScalarFn& f, const std::vector<Tensor*>& params, double step, double abs_floor) {
  if (sizeof(Real) != sizeof(double)) throw ConfigError("grad_check requires the 64-bit build");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (Tensor* p : params) leaves.push_back(tape.leaf_ref(*p));
    Var loss = f(tape, leaves);
    if (!std::isfinite(loss.value()[0])) throw NonFiniteError("grad_check: loss is not finite");
    tape.backward(loss);
    for (const Var& l : leaves) analytic.push_back(tape.grad(l));
  }

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const Real saved = t[i];
      t[i] = saved + step;
      const double up = evaluate(f, params);
      t[i] = saved - step;
      const double down = evaluate(f, params);
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_rel_error) result = {rel, p, i, a, numeric};
    }
  }
  return result;
}

}  // namespace cmta::ad
