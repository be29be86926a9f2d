// Central finite-difference gradient checker.
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "vsgae/tensor.hpp"

namespace vsgae::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

using ScalarFn = std::function<Tensor(std::span<const Tensor>)>;

/// Compares the tape gradient of f with respect to every entry of `inputs`
/// (leaf tensors that require gradients) against central differences.
/// Relative error is |a-b| / max(|a|, |b|, 1e-8). Throws std::domain_error on
/// non-finite values.
GradCheckReport gradcheck(const ScalarFn& f, std::span<const Tensor> inputs, double step = 1e-5,
                          double tolerance = 1e-4);

/// Pushes entries with |x| < margin out to +-margin so that a finite-difference
/// probe of size `step` << margin never straddles a ReLU kink at zero.
void move_off_kinks(Tensor& t, double margin = 1e-3);

}  // namespace vsgae::nn
