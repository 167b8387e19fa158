#include "tpa/gradcheck.hpp"

#include <cmath>

namespace tpa {

namespace {

double eval_scalar(const LossFn& f, const std::string& context) {
  Tape tape;
  Var out = f(tape);
  if (out.value().size() != 1) {
    throw DimensionError("grad_check: loss must be scalar, got " + shape_str(out.value().shape()));
  }
  const double v = out.value()(0);
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss while perturbing " + context);
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossFn& f, const NamedParams& params, double step, double tol) {
  if (!(step > 0.0) || step > 1e-3) {
    throw ConfigError("grad_check: step " + std::to_string(step) + " outside (0, 1e-3]");
  }

  for (const auto& [name, p] : params) {
    p->set_requires_grad(true);
    p->zero_grad();
  }

  {
    Tape tape;
    Var loss = f(tape);
    if (loss.value().size() != 1) {
      throw DimensionError("grad_check: loss must be scalar, got " + shape_str(loss.value().shape()));
    }
    if (!std::isfinite(loss.value()(0))) throw NumericError("grad_check: non-finite loss at base point");
    tape.backward(loss);
  }

  GradCheckReport report;
  report.tol = tol;
  for (const auto& [name, p] : params) {
    GradCheckEntry entry;
    entry.param = name;
    ArrayXd analytic = p->grad();
    for (Index i = 0; i < p->size(); ++i) {
      if (!std::isfinite(analytic(i))) {
        throw NumericError("grad_check: non-finite gradient in parameter " + name);
      }
      double& coord = p->data()[i];
      const double saved = coord;
      coord = saved + step;
      const double plus = eval_scalar(f, name);
      coord = saved - step;
      const double minus = eval_scalar(f, name);
      coord = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic(i) - numeric) / denom;
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_coordinate = i;
        entry.analytic = analytic(i);
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace tpa
