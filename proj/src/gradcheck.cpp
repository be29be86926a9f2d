#include "vsgae/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vsgae::nn {

namespace {

double evaluate(const ScalarFn& f, std::span<const Tensor> inputs) {
  NoGradGuard guard;
  const double v = f(inputs).item();
  if (!std::isfinite(v)) throw std::domain_error("gradcheck: function value is not finite");
  return v;
}

}  // namespace

GradCheckReport gradcheck(const ScalarFn& f, std::span<const Tensor> inputs, double step,
                          double tolerance) {
  std::vector<Tensor> leaves(inputs.begin(), inputs.end());
  for (auto& t : leaves) {
    if (!t.requires_grad()) throw std::invalid_argument("gradcheck: inputs must require gradients");
    t.clear_grad();
  }
  const Tensor y = f(leaves);
  if (!std::isfinite(y.item())) throw std::domain_error("gradcheck: function value is not finite");
  y.backward();

  GradCheckReport report;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    Tensor& t = leaves[i];
    const Matrix analytic = t.has_grad() ? t.grad() : Matrix::Zero(t.rows(), t.cols());
    if (!analytic.allFinite()) throw std::domain_error("gradcheck: gradient is not finite");
    double* data = t.mutable_value().data();
    for (Eigen::Index k = 0; k < analytic.size(); ++k) {
      const double saved = data[k];
      data[k] = saved + step;
      const double up = evaluate(f, leaves);
      data[k] = saved - step;
      const double down = evaluate(f, leaves);
      data[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[k];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++report.checked;
      if (rel > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        if (rel >= report.max_rel_error) {
          report.worst_input = i;
          report.worst_index = static_cast<std::size_t>(k);
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
    t.clear_grad();
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

void move_off_kinks(Tensor& t, double margin) {
  for (Eigen::Index k = 0; k < t.value().size(); ++k) {
    double& x = t.mutable_value().data()[k];
    if (std::abs(x) < margin) x = x < 0 ? -margin : margin;
  }
}

}  // namespace vsgae::nn
