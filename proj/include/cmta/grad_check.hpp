#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cmta/autodiff.hpp"

namespace cmta::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  // Parameter index and flat element of the worst disagreement.
  std::size_t worst_param = 0;
  std::size_t worst_element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Scalar loss built on a fresh tape from leaves bound to the given tensors.
using ScalarFn = std::function<Var(Tape&, const std::vector<Var>& leaves)>;

// Compares tape adjoints against central finite differences. Relative error
// is |a - n| / max(|a|, |n|, abs_floor). Requires the 64-bit build; a
// non-finite loss throws NonFiniteError. Parameters are perturbed in place
// and restored.
GradCheckResult grad_check(const ScalarFn& f, const std::vector<Tensor*>& params, double step = 1e-5,
                           double abs_floor = 1e-6);

}  // namespace cmta::ad
