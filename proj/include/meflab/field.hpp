#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>

#include "meflab/rng.hpp"
#include "meflab/tensor.hpp"

namespace meflab {

// A differentiable scalar field J(x): anything exposing loss() and an
// analytic grad() of matching shape. Classifier losses, penalized losses and
// closed-form test functions all satisfy this, so the estimators and the
// derivative checker below never care where the field came from.
template <typename F, typename T>
concept LossField = requires(const F& f, const Tensor<T>& x) {
  { f.loss(x) } -> std::convertible_to<T>;
  { f.grad(x) } -> std::convertible_to<Tensor<T>>;
};

// Max relative disagreement between the analytic gradient and central
// differences over `samples` coordinates drawn without replacement when
// possible. Relative error uses max(|analytic|, 1e-8) as denominator so
// exact zeros don't blow up.
template <typename T, typename F>
  requires LossField<F, T>
double finite_diff_check(const F& f, const Tensor<T>& x, double h, std::size_t samples,
                         rng::Stream& rs) {
  require(h > 0, "finite_diff_check: step must be positive");
  require(x.size() > 0, "finite_diff_check: empty input");
  Tensor<T> g = f.grad(x);
  require(g.same_shape(x), "finite_diff_check: gradient shape mismatch");
  double worst = 0.0;
  Tensor<T> probe = x;
  for (std::size_t s = 0; s < samples; ++s) {
    std::size_t i = rs.index(x.size());
    T saved = probe[i];
    probe[i] = saved + static_cast<T>(h);
    double up = static_cast<double>(f.loss(probe));
    probe[i] = saved - static_cast<T>(h);
    double down = static_cast<double>(f.loss(probe));
    probe[i] = saved;
    require(std::isfinite(up) && std::isfinite(down),
            "finite_diff_check: field non-finite near sample point");
    double central = (up - down) / (2.0 * h);
    double analytic = static_cast<double>(g[i]);
    double rel = std::abs(analytic - central) / std::max(std::abs(analytic), 1e-8);
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace meflab
