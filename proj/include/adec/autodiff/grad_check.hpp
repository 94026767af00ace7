#pragma once

#include <functional>
#include <vector>

#include "adec/autodiff/tape.hpp"

namespace adec::ad {

template <class T>
using ScalarFn = std::function<Tensor<T>(Tape<T>&, const std::vector<Tensor<T>>&)>;

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double analytic_at_worst = 0;
  double numeric_at_worst = 0;
  std::size_t elements_checked = 0;
};

/// Compares reverse-mode gradients of f against central differences.
/// The relative error of one element is |a - n| / max(1, |a|, |n|).
/// Inputs that do not require a gradient are held fixed and not checked.
template <class T>
GradCheckResult grad_check(const ScalarFn<T>& f, const std::vector<Tensor<T>>& inputs, double eps);

extern template GradCheckResult grad_check<float>(const ScalarFn<float>&,
                                                  const std::vector<Tensor<float>>&, double);
extern template GradCheckResult grad_check<double>(const ScalarFn<double>&,
                                                   const std::vector<Tensor<double>>&, double);

}  // namespace adec::ad
