#pragma once

// Closed-form infidelity laws for pure, mixed and nearly-pure qubit states.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "qtomo/povm.hpp"
#include "qtomo/protocol.hpp"

namespace qtomo::theory {

inline constexpr double kDefaultBeta = 0.6662;
inline constexpr double kDefaultGamma = 0.5296;

enum class Regime { BelowTurning, AboveTurning, Asymptotic };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::BelowTurning: return "below-turning";
    case Regime::AboveTurning: return "above-turning";
    case Regime::Asymptotic: return "asymptotic";
  }
  return "?";
}

struct Prediction {
  Regime regime = Regime::Asymptotic;
  double infidelity = 0.0;
  std::optional<double> turning_n;

  /// Within half a decade of the turning point, where neither branch is accurate.
  bool near_turning(double n) const {
    return turning_n && std::abs(std::log10(n / *turning_n)) < 0.5;
  }
};

namespace detail {

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 0.5))
    throw std::domain_error("lambda must lie in [0, 1/2]");
}

inline void check_n(double n) {
  if (!(n >= 1.0)) throw std::domain_error("shot count must be at least 1");
}

inline Prediction piecewise(double lambda, double n, double turning, double below, double above) {
  if (lambda == 0.0) return {Regime::Asymptotic, below, std::nullopt};
  if (n < turning) return {Regime::BelowTurning, below, turning};
  return {Regime::AboveTurning, above, turning};
}

}  // namespace detail

/// Typical length of the reconstructed SIC Bloch vector: sqrt(s^2 + (9 - s^2)/N).
inline double s_eff(double s_true, double n) {
  if (!(s_true >= 0.0 && s_true <= 1.0)) throw std::domain_error("s_eff: s must lie in [0, 1]");
  detail::check_n(n);
  return std::sqrt(s_true * s_true + (9.0 - s_true * s_true) / n);
}

/// Optimal-configuration (known-basis) tomography of a state with smaller eigenvalue lambda.
inline Prediction predict_known_basis(Family meas, double lambda, double n) {
  detail::check_lambda(lambda);
  detail::check_n(n);
  if (meas == Family::Sic) {
    const double turning = lambda > 0.0 ? 2.0 / lambda : 0.0;
    return detail::piecewise(lambda, n, turning, lambda + 1.0 / (2.0 * n), 2.0 / n);
  }
  const double turning = lambda > 0.0 ? 3.0 / (2.0 * lambda) : 0.0;
  return detail::piecewise(lambda, n, turning, lambda + 2.0 / (3.0 * n), 3.0 / (2.0 * n));
}

/// Two-step adaptive tomography; beta (SIC) or gamma (MUB) is the fitted
/// misalignment coefficient.
inline Prediction predict_adaptive(Family meas, double lambda, double n, double coefficient) {
  detail::check_lambda(lambda);
  detail::check_n(n);
  if (!(coefficient > 0.0)) throw std::domain_error("adaptive coefficient must be positive");
  if (meas == Family::Sic) {
    const double turning = lambda > 0.0 ? 4.0 / lambda : 0.0;
    return detail::piecewise(lambda, n, turning, lambda + 2.0 * coefficient / n + 1.0 / n,
                             4.0 / n);
  }
  const double turning = lambda > 0.0 ? 3.0 / lambda : 0.0;
  return detail::piecewise(lambda, n, turning,
                           lambda + 2.0 * coefficient / n + 4.0 / (3.0 * n), 3.0 / n);
}

inline Prediction predict_adaptive(Family meas, double lambda, double n) {
  return predict_adaptive(meas, lambda, n, meas == Family::Sic ? kDefaultBeta : kDefaultGamma);
}

/// Statistics-limited 1/N law of typical static tomography: 2/N (SIC), 3/(2N) (MUB).
inline double predict_static_mixed(Family meas, double n) {
  detail::check_n(n);
  return meas == Family::Sic ? 2.0 / n : 3.0 / (2.0 * n);
}

/// The state behaves as nearly pure while the shot-noise width of the rare
/// outcome exceeds its probability, i.e. lambda < 2 / (N + 1).
inline bool nearly_pure_criterion(double lambda, double n) {
  detail::check_lambda(lambda);
  return lambda < 2.0 / (n + 1.0);
}

/// Dispatch used by overlays. Static tomography only has its large-N 1/N law,
/// which does not exist for pure states.
inline std::optional<Prediction> predict(ProtocolKind kind, Family meas, double lambda, double n,
                                         double beta = kDefaultBeta, double gamma = kDefaultGamma) {
  switch (kind) {
    case ProtocolKind::KnownBasis: return predict_known_basis(meas, lambda, n);
    case ProtocolKind::Adaptive:
      return predict_adaptive(meas, lambda, n, meas == Family::Sic ? beta : gamma);
    case ProtocolKind::Static:
      if (lambda == 0.0) return std::nullopt;
      return Prediction{Regime::Asymptotic, predict_static_mixed(meas, n), std::nullopt};
  }
  return std::nullopt;
}

}  // namespace qtomo::theory
