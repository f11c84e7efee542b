#pragma once

// State reconstruction from counts: linear inversion, constrained maximum
// likelihood, and the closed-form SIC boundary solutions.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "qtomo/povm.hpp"
#include "qtomo/qubit.hpp"
#include "qtomo/sampler.hpp"

namespace qtomo {

enum class MleMethod { InversionPhysical, FixedPoint, Analytic };

inline std::string_view to_string(MleMethod m) {
  switch (m) {
    case MleMethod::InversionPhysical: return "inversion-physical";
    case MleMethod::FixedPoint: return "fixed-point";
    case MleMethod::Analytic: return "analytic";
  }
  return "?";
}

struct Estimate {
  BlochVector raw;
  QubitState mle;
  double log_likelihood = 0.0;
  MleMethod method = MleMethod::InversionPhysical;
  int iterations = 0;
  bool converged = true;
};

struct MleOptions {
  int max_iterations = 100000;
  double tolerance = 1e-12;   // per-iteration log-likelihood improvement
  int patience = 3;           // consecutive small improvements before stopping
  double min_dilution = 1e-6;
  bool polish = true;         // finish boundary solutions with Newton steps on the sphere
};

/// SIC: s = 3 sum_i f_i a_i.  MUB: component along u_b is 2 f_{b,+} - 1.
inline BlochVector linear_inversion(const MeasurementModel& m,
                                    const std::vector<std::vector<double>>& f) {
  BlochVector s{};
  if (const auto* sic = std::get_if<SicModel>(&m)) {
    if (f.size() != 1 || f[0].size() != 4)
      throw std::invalid_argument("linear_inversion: SIC expects one length-4 frequency vector");
    for (std::size_t i = 0; i < 4; ++i) s += 3.0 * f[0][i] * sic->directions[i];
    return s;
  }
  const auto& mub = std::get<MubModel>(m);
  if (f.size() != 3) throw std::invalid_argument("linear_inversion: MUB expects three settings");
  for (std::size_t b = 0; b < 3; ++b) {
    if (f[b].size() != 2) throw std::invalid_argument("linear_inversion: MUB settings are pairs");
    s += (2.0 * f[b][0] - 1.0) * mub.axes[b];
  }
  return s;
}

namespace detail {

struct Term {
  BlochVector direction;
  double weight;
  double count;
};

/// Likelihood data flattened to (direction, weight, count) triples; the
/// probability of term k is weight_k (1 + direction_k . s).
class Likelihood {
 public:
  Likelihood() = default;
  Likelihood(const MeasurementModel& m, const CountRecord& c) { add(m, c); }

  /// Appends an independently sampled record taken with model `m`.
  void add(const MeasurementModel& m, const CountRecord& c) {
    if (!c.valid()) throw std::invalid_argument("log_likelihood: inconsistent count record");
    if (c.settings.size() != setting_count(m))
      throw std::invalid_argument("log_likelihood: count record does not match the model");
    for (const auto& o : outcomes(m)) {
      const auto& row = c.settings[o.setting];
      if (row.size() <= o.index)
        throw std::invalid_argument("log_likelihood: count record does not match the model");
      const auto n = static_cast<double>(row[o.index]);
      if (n > 0.0) terms_.push_back({o.direction, o.weight, n});
      total_ += n;
    }
  }

  double total() const { return total_; }
  std::span<const Term> terms() const { return terms_; }

  double operator()(BlochVector s) const {
    double ll = 0.0;
    for (const auto& t : terms_) {
      const double q = 1.0 + dot(t.direction, s);
      if (q <= 0.0) return -std::numeric_limits<double>::infinity();
      ll += t.count * std::log(t.weight * q);
    }
    return ll;
  }

  void gradient_hessian(BlochVector s, BlochVector& g, double (&h)[3][3]) const {
    g = {};
    for (auto& row : h)
      for (double& v : row) v = 0.0;
    for (const auto& t : terms_) {
      const double q = 1.0 + dot(t.direction, s);
      g += (t.count / q) * t.direction;
      const double k = t.count / (q * q);
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) h[i][j] -= k * t.direction[i] * t.direction[j];
    }
  }

  /// Coefficients (r0, r) of R = r0 I + r.sigma = sum_k (n_k / p_k) E_k / N.
  void r_operator(BlochVector s, double& r0, BlochVector& r) const {
    r0 = 0.0;
    r = {};
    for (const auto& t : terms_) {
      const double p = t.weight * (1.0 + dot(t.direction, s));
      const double c = t.count * t.weight / (p * total_);
      r0 += c;
      r += c * t.direction;
    }
  }

 private:
  std::vector<Term> terms_;
  double total_ = 0.0;
};

inline BlochVector orthogonal_unit(BlochVector v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(v[i]) < std::abs(v[best])) best = i;
  BlochVector e{};
  e[best] = 1.0;
  return normalized(e - dot(e, v) * v);
}

// One diluted step rho <- (I + eps R) rho (I + eps R) / trace, in Bloch form.
inline BlochVector diluted_step(BlochVector s, double eps, double r0, BlochVector r) {
  DensityMatrix a;
  const double c0 = 1.0 + eps * r0;
  const BlochVector c = eps * r;
  a(0, 0) = {c0 + c.z, 0.0};
  a(0, 1) = {c.x, -c.y};
  a(1, 0) = {c.x, c.y};
  a(1, 1) = {c0 - c.z, 0.0};
  const DensityMatrix next = a * bloch_to_density(s) * a;
  const double tr = next.trace().real();
  return {2.0 * next(1, 0).real() / tr, 2.0 * next(1, 0).imag() / tr,
          (next(0, 0) - next(1, 1)).real() / tr};
}

/// Newton ascent of the likelihood restricted to the unit sphere, with backtracking.
inline BlochVector maximize_on_sphere(const Likelihood& like, BlochVector start, int* steps = nullptr) {
  BlochVector s = normalized(start);
  double ll = like(s);
  int it = 0;
  for (; it < 200; ++it) {
    BlochVector g;
    double h[3][3];
    like.gradient_hessian(s, g, h);
    const BlochVector e1 = orthogonal_unit(s);
    const BlochVector e2 = cross(s, e1);
    const double radial = dot(s, g);
    const double g1 = dot(e1, g);
    const double g2 = dot(e2, g);
    if (std::hypot(g1, g2) <= 1e-14 * (1.0 + like.total())) break;
    auto quad = [&h](BlochVector a, BlochVector b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) acc += a[i] * h[i][j] * b[j];
      return acc;
    };
    const double h11 = quad(e1, e1) - radial;
    const double h12 = quad(e1, e2);
    const double h22 = quad(e2, e2) - radial;
    const double det = h11 * h22 - h12 * h12;
    double d1, d2;
    if (h11 < 0.0 && det > 0.0) {
      d1 = -(h22 * g1 - h12 * g2) / det;
      d2 = -(-h12 * g1 + h11 * g2) / det;
    } else {
      const double scale = 1.0 / (1.0 + std::abs(h11) + std::abs(h22));
      d1 = g1 * scale;
      d2 = g2 * scale;
    }
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const BlochVector trial = normalized(s + t * d1 * e1 + t * d2 * e2);
      const double lt = like(trial);
      if (lt >= ll) {
        moved = !(trial == s);
        s = trial;
        ll = lt;
        break;
      }
    }
    if (!moved) break;
  }
  if (steps) *steps = it;
  return s;
}

/// Damped Newton ascent inside the open ball; steps leaving the ball are shortened.
inline BlochVector maximize_in_ball(const Likelihood& like, BlochVector start) {
  BlochVector s = start;
  double ll = like(s);
  for (int it = 0; it < 200; ++it) {
    BlochVector g;
    double h[3][3];
    like.gradient_hessian(s, g, h);
    if (g.norm() <= 1e-14 * (1.0 + like.total())) break;
    // Solve h d = -g by Cramer's rule; h is negative definite when the observed
    // directions span space, otherwise fall back to a scaled gradient step.
    const double det = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
                       h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
                       h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    BlochVector d;
    if (det < 0.0 && h[0][0] < 0.0 && h[0][0] * h[1][1] - h[0][1] * h[1][0] > 0.0) {
      auto col = [&h](std::size_t j, BlochVector v) {
        double m[3][3];
        for (std::size_t r = 0; r < 3; ++r)
          for (std::size_t c = 0; c < 3; ++c) m[r][c] = c == j ? v[r] : h[r][c];
        return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
      };
      d = {col(0, -g) / det, col(1, -g) / det, col(2, -g) / det};
    } else {
      d = g / (1.0 + std::abs(h[0][0]) + std::abs(h[1][1]) + std::abs(h[2][2]));
    }
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const BlochVector trial = s + t * d;
      if (trial.norm() >= 1.0) continue;
      const double lt = like(trial);
      if (lt >= ll) {
        moved = !(trial == s);
        s = trial;
        ll = lt;
        break;
      }
    }
    if (!moved) break;
  }
  return s;
}

/// KKT test for a boundary maximiser: the gradient at the unit vector `s` is
/// (up to `tol`) parallel to s and points outwards. With a concave likelihood
/// this certifies the global maximum over the ball.
inline bool is_boundary_optimum(const Likelihood& like, BlochVector s, double tol) {
  BlochVector g;
  double h[3][3];
  like.gradient_hessian(s, g, h);
  const double radial = dot(s, g);
  const BlochVector tangential = g - radial * s;
  return radial >= -tol && tangential.norm() <= tol;
}

/// Diluted fixed-point iteration from the maximally mixed state, then Newton
/// polishing on the sphere and in the interior; the better point is kept.
/// Sets est.iterations and est.converged.
inline QubitState solve_constrained(const Likelihood& like, const MleOptions& opt, Estimate& est) {
  BlochVector s{};
  double ll = like(s);
  double eps = 1.0;
  int quiet = 0;
  est.converged = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    double r0;
    BlochVector r;
    like.r_operator(s, r0, r);
    const BlochVector next = diluted_step(s, eps, r0, r);
    const double ln = like(next);
    // Improvements below the rounding level of the log-likelihood itself
    // cannot be resolved, so the threshold is floored there.
    const double tol = std::max(opt.tolerance, 1e-15 * std::abs(ll));
    if (!(ln >= ll)) {
      if (ll - ln > tol) {
        if (eps <= opt.min_dilution) {
          est.converged = true;
          break;
        }
        eps = std::max(0.5 * eps, opt.min_dilution);
        continue;
      }
      if (++quiet >= opt.patience) {
        est.converged = true;
        break;
      }
      continue;
    }
    const double gain = ln - ll;
    s = next;
    ll = ln;
    quiet = gain < tol ? quiet + 1 : 0;
    if (quiet >= opt.patience) {
      est.converged = true;
      ++it;
      break;
    }
  }
  est.iterations = it;
  if (s.norm() > 1.0) s = s / s.norm();
  if (opt.polish) {
    const double kkt_tol = 1e-8 * (1.0 + like.total());
    if (s.norm() > 0.0) {
      const BlochVector boundary = maximize_on_sphere(like, s);
      const double lb = like(boundary);
      if (lb >= ll) {
        s = boundary;
        ll = lb;
      }
    }
    if (s.norm() < 1.0) {
      const BlochVector interior = maximize_in_ball(like, s);
      const double li = like(interior);
      if (li > ll) {
        s = interior;
        ll = li;
      }
    }
    // A capped run on a record whose optimum is barely on the boundary still
    // ends at a certified optimum once polished.
    if (!est.converged) {
      BlochVector g;
      double h[3][3];
      like.gradient_hessian(s, g, h);
      const bool interior_ok = s.norm() < 1.0 && g.norm() <= kkt_tol;
      const bool boundary_ok = std::abs(s.norm() - 1.0) < 1e-12 && is_boundary_optimum(like, s, kkt_tol);
      est.converged = interior_ok || boundary_ok;
    }
  }
  return project_to_ball(s);
}

}  // namespace detail

/// sum over settings and outcomes of n_i ln Tr(E_i rho), with 0 ln 0 = 0.
inline double log_likelihood(const MeasurementModel& m, const CountRecord& c, const QubitState& s) {
  return detail::Likelihood(m, c)(s.bloch());
}

/// Physically constrained maximum-likelihood estimate.
///
/// When the linear inversion lies in the Bloch ball it is the unconstrained
/// maximiser and is returned as is. Otherwise the diluted fixed-point iteration
/// runs from the maximally mixed state (dilution halved whenever a step would
/// lower the likelihood) and, because the constrained maximum then lies on the
/// sphere, the iterate is finished with Newton steps on the sphere. Any
/// `candidates` the caller supplies are compared and the best is returned.
inline Estimate mle(const MeasurementModel& m, const CountRecord& c,
                    std::span<const QubitState> candidates = {}, const MleOptions& opt = {}) {
  if (c.total() <= 0) throw std::invalid_argument("mle: no shots recorded");
  const detail::Likelihood like(m, c);
  Estimate est;
  est.raw = linear_inversion(m, frequencies(c));

  if (est.raw.norm() <= 1.0) {
    est.mle = QubitState{est.raw};
    est.method = MleMethod::InversionPhysical;
  } else {
    est.method = MleMethod::FixedPoint;
    est.mle = detail::solve_constrained(like, opt, est);
  }
  est.log_likelihood = like(est.mle.bloch());
  for (const auto& cand : candidates) {
    const double lc = like(cand.bloch());
    if (lc > est.log_likelihood) {
      est.mle = cand;
      est.log_likelihood = lc;
    }
  }
  return est;
}

/// One batch of counts together with the configuration it was measured in.
struct Batch {
  MeasurementModel model;
  CountRecord counts;
};

/// Maximum likelihood over several independently measured batches (for
/// example the two stages of an adaptive run). No closed-form unconstrained
/// maximiser exists for mixed configurations, so the iterative solver always
/// runs. `raw` is the shot-weighted mean of the per-batch linear inversions.
inline Estimate mle(std::span<const Batch> batches, const MleOptions& opt = {}) {
  if (batches.empty()) throw std::invalid_argument("mle: no batches");
  if (batches.size() == 1) return mle(batches[0].model, batches[0].counts, {}, opt);
  detail::Likelihood like;
  Estimate est;
  double shots = 0.0;
  for (const auto& b : batches) {
    like.add(b.model, b.counts);
    const auto n = static_cast<double>(b.counts.total());
    if (n > 0.0) est.raw += n * linear_inversion(b.model, frequencies(b.counts));
    shots += n;
  }
  if (shots <= 0.0) throw std::invalid_argument("mle: no shots recorded");
  est.raw = est.raw / shots;
  est.method = MleMethod::FixedPoint;
  est.mle = detail::solve_constrained(like, opt, est);
  est.log_likelihood = like(est.mle.bloch());
  return est;
}

/// Solves the SIC boundary extremum equations
///   mu + 2 - 1/2 sum_i sqrt((1 - mu)^2 + 12 mu f_i) = 0,
///   f_i / p_i = 1 - mu + 3 mu p_i,
/// for the multiplier mu by bisection and returns the probabilities p_i.
/// Only meaningful when the linear inversion of `f` is on or outside the sphere.
inline std::vector<double> mle_sic_lagrange(std::span<const double> f) {
  if (f.size() != 4) throw std::invalid_argument("mle_sic_lagrange: expects four frequencies");
  double sum2 = 0.0;
  for (double v : f) sum2 += v * v;
  // sum f^2 >= 1/3 exactly when the inverted Bloch vector has |s| >= 1.
  if (!(sum2 >= 1.0 / 3.0 - 1e-12))
    throw std::domain_error("mle_sic_lagrange: linear inversion is physical; no boundary solution");

  auto g = [&f](double mu) {
    double acc = 0.0;
    for (double v : f) acc += std::sqrt((1.0 - mu) * (1.0 - mu) + 12.0 * mu * v);
    return mu + 2.0 - 0.5 * acc;
  };
  double lo = 1e-12;
  double hi = 1.0;
  double mu = 1.0;
  if (g(hi) != 0.0) {
    // g > 0 just above zero for unphysical inversions; the root can sit above 1
    // (it does whenever some f_i = 0), so the upper end grows until g < 0.
    while (g(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e6) throw std::domain_error("mle_sic_lagrange: no root in bracket");
    }
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (g(mid) > 0.0 ? lo : hi) = mid;
    }
    mu = 0.5 * (lo + hi);
  }
  std::vector<double> p(4);
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double b = 1.0 - mu;
    p[i] = std::max(0.0, (-b + std::sqrt(b * b + 12.0 * mu * f[i])) / (6.0 * mu));
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

/// Small-fluctuation solution at the antiparallel configuration (f_0 = 0):
/// p_i = sqrt(f_i / 3) for i = 1..3, p_0 = 1 - p_1 - p_2 - p_3.
inline std::vector<double> mle_sic_antiparallel(std::span<const double> f) {
  if (f.size() != 4) throw std::invalid_argument("mle_sic_antiparallel: expects four frequencies");
  std::vector<double> p(4);
  p[0] = 1.0;
  for (std::size_t i = 1; i < 4; ++i) {
    p[i] = std::sqrt(f[i] / 3.0);
    p[0] -= p[i];
  }
  return p;
}

/// Maximum likelihood for a SIC record through the analytic boundary solution.
inline Estimate mle_sic_analytic(const SicModel& m, const CountRecord& c) {
  const MeasurementModel model = m;
  const auto f = frequencies(c);
  Estimate est;
  est.raw = linear_inversion(model, f);
  if (est.raw.norm() <= 1.0) {
    est.mle = QubitState{est.raw};
    est.method = MleMethod::InversionPhysical;
  } else {
    const auto p = mle_sic_lagrange(f[0]);
    BlochVector s = linear_inversion(model, {p});
    if (s.norm() > 1.0) s = s / s.norm();
    est.mle = QubitState{s};
    est.method = MleMethod::Analytic;
  }
  est.log_likelihood = log_likelihood(model, c, est.mle);
  return est;
}

}  // namespace qtomo
