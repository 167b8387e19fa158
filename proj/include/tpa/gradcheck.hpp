#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tpa/tape.hpp"

namespace tpa {

struct GradCheckEntry {
  std::string param;
  double max_rel_error = 0.0;
  Index worst_coordinate = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double tol = 0.0;
  std::vector<GradCheckEntry> entries;
  bool passed() const { return max_rel_error < tol; }
};

// Scalar loss builder; called with a fresh tape per evaluation. Must be a
// deterministic function of the named parameters.
using LossFn = std::function<Var(Tape&)>;

using NamedParams = std::vector<std::pair<std::string, Tensor*>>;

// Compares tape gradients against central finite differences
// (f(p+h) - f(p-h)) / 2h for every coordinate of every named parameter.
// Relative error uses max(|analytic|, |numeric|, 1e-6) as the denominator.
GradCheckReport grad_check(const LossFn& f, const NamedParams& params, double step, double tol);

}  // namespace tpa
