#include "adec/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "adec/errors.hpp"

namespace adec::ad {

namespace {

template <class T>
std::vector<Tensor<T>> fresh_copies(const std::vector<Tensor<T>>& inputs, bool with_grad) {
  std::vector<Tensor<T>> out;
  out.reserve(inputs.size());
  for (const auto& t : inputs) {
    out.emplace_back(t.shape(), std::vector<T>(t.data().begin(), t.data().end()),
                     with_grad && t.requires_grad());
  }
  return out;
}

template <class T>
double eval_scalar(const ScalarFn<T>& f, const std::vector<Tensor<T>>& args) {
  Tape<T> tape;
  const Tensor<T> y = f(tape, args);
  if (y.size() != 1) throw ContractError("grad_check: function must return a scalar");
  return static_cast<double>(y.item());
}

}  // namespace

template <class T>
GradCheckResult grad_check(const ScalarFn<T>& f, const std::vector<Tensor<T>>& inputs, double eps) {
  if (!(eps >= 1e-5 && eps <= 1e-3)) {
    throw ContractError("grad_check: eps must lie in [1e-5, 1e-3]");
  }
  auto leaves = fresh_copies(inputs, true);
  {
    Tape<T> tape;
    const Tensor<T> y = f(tape, leaves);
    if (y.size() != 1) throw ContractError("grad_check: function must return a scalar");
    tape.backward(y);
  }

  GradCheckResult res;
  auto probe = fresh_copies(inputs, false);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    const auto base = inputs[i].data();
    std::vector<T> buf(base.begin(), base.end());
    for (std::size_t j = 0; j < buf.size(); ++j) {
      const T x0 = base[j];
      const T xp = static_cast<T>(x0 + eps);
      const T xm = static_cast<T>(x0 - eps);
      buf[j] = xp;
      probe[i] = Tensor<T>(inputs[i].shape(), buf);
      const double fp = eval_scalar(f, probe);
      buf[j] = xm;
      probe[i] = Tensor<T>(inputs[i].shape(), buf);
      const double fm = eval_scalar(f, probe);
      buf[j] = x0;
      const double numeric = (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm));
      const double analytic = leaves[i].has_grad() ? static_cast<double>(leaves[i].grad()[j]) : 0.0;
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      const double err = std::abs(analytic - numeric) / denom;
      ++res.elements_checked;
      if (err > res.max_rel_error || !std::isfinite(err)) {
        res.max_rel_error = std::isfinite(err) ? err : INFINITY;
        res.worst_input = i;
        res.worst_element = j;
        res.analytic_at_worst = analytic;
        res.numeric_at_worst = numeric;
      }
    }
    probe[i] = Tensor<T>(inputs[i].shape(), buf);
  }
  return res;
}

template GradCheckResult grad_check<float>(const ScalarFn<float>&, const std::vector<Tensor<float>>&,
                                           double);
template GradCheckResult grad_check<double>(const ScalarFn<double>&,
                                            const std::vector<Tensor<double>>&, double);

}  // namespace adec::ad
