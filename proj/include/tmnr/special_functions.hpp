#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tmnr {

namespace detail {

// Below this the asymptotic tails are no longer accurate to ~1e-15.
template <typename Scalar>
constexpr Scalar kAsymptoticThreshold = Scalar(10);

template <typename Scalar>
void require_positive(Scalar x, const char* name) {
  if (!(x > Scalar(0)) || !std::isfinite(x)) {
    throw std::domain_error(std::string(name) + ": argument must be finite and > 0, got " +
                            std::to_string(static_cast<double>(x)));
  }
}

}  // namespace detail

/// Digamma function psi(x) = d/dx ln Gamma(x) for x > 0.
///
/// Shifts x upward with psi(x) = psi(x + 1) - 1/x until x >= 10, then sums the
/// asymptotic expansion ln x - 1/(2x) - sum_k B_2k / (2k x^2k).
template <typename Scalar>
Scalar digamma(Scalar x) {
  detail::require_positive(x, "digamma");
  Scalar shift = 0;
  while (x < detail::kAsymptoticThreshold<Scalar>) {
    shift -= Scalar(1) / x;
    x += Scalar(1);
  }
  const Scalar inv = Scalar(1) / x;
  const Scalar inv2 = inv * inv;
  // Horner form of 1/12 - 1/120 z + 1/252 z^2 - 1/240 z^3 + 1/132 z^4 - 691/32760 z^5 + 1/12 z^6
  const Scalar tail =
      inv2 * (Scalar(1) / 12 -
              inv2 * (Scalar(1) / 120 -
                      inv2 * (Scalar(1) / 252 -
                              inv2 * (Scalar(1) / 240 -
                                      inv2 * (Scalar(1) / 132 -
                                              inv2 * (Scalar(691) / 32760 - inv2 * (Scalar(1) / 12)))))));
  return shift + std::log(x) - Scalar(0.5) * inv - tail;
}

/// Trigamma psi'(x) for x > 0. Used by the analytic gradients of the Dirichlet losses.
template <typename Scalar>
Scalar trigamma(Scalar x) {
  detail::require_positive(x, "trigamma");
  Scalar shift = 0;
  while (x < detail::kAsymptoticThreshold<Scalar>) {
    shift += Scalar(1) / (x * x);
    x += Scalar(1);
  }
  const Scalar inv = Scalar(1) / x;
  const Scalar inv2 = inv * inv;
  // 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
  const Scalar tail =
      inv * inv2 *
      (Scalar(1) / 6 -
       inv2 * (Scalar(1) / 30 -
               inv2 * (Scalar(1) / 42 -
                       inv2 * (Scalar(1) / 30 -
                               inv2 * (Scalar(5) / 66 - inv2 * (Scalar(691) / 2730 - inv2 * (Scalar(7) / 6)))))));
  return shift + inv + Scalar(0.5) * inv2 + tail;
}

/// Natural log of the gamma function for x > 0 (Stirling series after upward shift).
template <typename Scalar>
Scalar log_gamma(Scalar x) {
  detail::require_positive(x, "log_gamma");
  Scalar product = 1;
  while (x < detail::kAsymptoticThreshold<Scalar>) {
    product *= x;
    x += Scalar(1);
  }
  const Scalar inv = Scalar(1) / x;
  const Scalar inv2 = inv * inv;
  const Scalar series =
      inv * (Scalar(1) / 12 -
             inv2 * (Scalar(1) / 360 -
                     inv2 * (Scalar(1) / 1260 -
                             inv2 * (Scalar(1) / 1680 -
                                     inv2 * (Scalar(1) / 1188 -
                                             inv2 * (Scalar(691) / 360360 - inv2 * (Scalar(1) / 156)))))));
  const Scalar half_log_two_pi = Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  return (x - Scalar(0.5)) * std::log(x) - x + half_log_two_pi + series - std::log(product);
}

}  // namespace tmnr
