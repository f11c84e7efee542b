#pragma once

// Exhaustive-search maximum likelihood, used as an oracle for the iterative
// estimator. It only evaluates log_likelihood; nothing here shares code with mle().

#include <cmath>
#include <limits>
#include <stdexcept>

#include "qtomo/estimator.hpp"

namespace qtomo {

namespace detail {

inline BlochVector clip_to_ball(BlochVector v) {
  const double n = v.norm();
  return n > 1.0 ? v / n : v;
}

struct GridBest {
  BlochVector point{};
  double ll = -std::numeric_limits<double>::infinity();
};

// Scans a cubic grid centred at `centre` with `half` cells each side. Points
// outside the ball are replaced by their radial projection, so the sphere is
// covered. Strict comparison keeps the lexicographically first maximiser.
template <class F>
GridBest scan_grid(const F& ll, BlochVector centre, double spacing, int half) {
  GridBest best;
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j)
      for (int k = -half; k <= half; ++k) {
        const BlochVector p = clip_to_ball(centre + BlochVector{i * spacing, j * spacing, k * spacing});
        const double v = ll(p);
        if (v > best.ll) best = {p, v};
      }
  return best;
}

// Compass search over `map(u)`, step halving down to `min_step`.
template <class F, class Map, std::size_t D>
void compass(const F& ll, const Map& map, std::array<double, D>& u, double& best, double step,
             double min_step) {
  while (step > min_step) {
    bool improved = false;
    for (std::size_t d = 0; d < D; ++d)
      for (double sign : {1.0, -1.0}) {
        auto trial = u;
        trial[d] += sign * step;
        const double v = ll(map(trial));
        if (v > best) {
          best = v;
          u = trial;
          improved = true;
        }
      }
    if (!improved) step *= 0.5;
  }
}

}  // namespace detail

/// Grid search over the Bloch ball at `resolution`, followed by compass-search
/// refinement both in the interior and on the sphere. Deterministic.
inline QubitState brute_force_mle(const MeasurementModel& m, const CountRecord& c,
                                  double resolution) {
  if (!(resolution > 0.0 && resolution <= 0.1))
    throw std::invalid_argument("brute_force_mle: resolution must lie in (0, 0.1]");
  auto ll = [&m, &c](BlochVector s) { return log_likelihood(m, c, QubitState{s}); };

  // Full grid at the coarse spacing, then zoom by 4x around the incumbent.
  double spacing = 0.05;
  auto best = detail::scan_grid(ll, BlochVector{}, spacing, 21);
  while (spacing > resolution) {
    const double next = std::max(resolution, spacing / 4.0);
    const int half = static_cast<int>(std::ceil(4.0 * spacing / next));
    best = detail::scan_grid(ll, best.point, next, half);
    spacing = next;
  }

  // Interior refinement in Cartesian coordinates (clipped to the ball).
  std::array<double, 3> u{best.point.x, best.point.y, best.point.z};
  double interior = best.ll;
  detail::compass(
      ll, [](const std::array<double, 3>& v) { return detail::clip_to_ball({v[0], v[1], v[2]}); },
      u, interior, resolution, 1e-13);
  BlochVector result = detail::clip_to_ball({u[0], u[1], u[2]});
  double result_ll = interior;

  // Boundary refinement in tangent-plane coordinates about the incumbent direction.
  if (best.point.norm() > 0.0) {
    const BlochVector b = normalized(best.point);
    const BlochVector e1 = detail::orthogonal_unit(b);
    const BlochVector e2 = cross(b, e1);
    auto on_sphere = [&](const std::array<double, 2>& v) {
      return normalized(b + v[0] * e1 + v[1] * e2);
    };
    std::array<double, 2> w{0.0, 0.0};
    double boundary = ll(b);
    detail::compass(ll, on_sphere, w, boundary, resolution, 1e-13);
    if (boundary > result_ll) {
      result = on_sphere(w);
      result_ll = boundary;
    }
  }
  return QubitState{detail::clip_to_ball(result)};
}

}  // namespace qtomo
