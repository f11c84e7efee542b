#pragma once

// Single-trial tomography procedures: static, two-step adaptive, known-basis.

#include <stdexcept>
#include <string>
#include <string_view>

#include "qtomo/estimator.hpp"

namespace qtomo {

enum class ProtocolKind { Static, Adaptive, KnownBasis };

inline std::string_view to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::Static: return "static";
    case ProtocolKind::Adaptive: return "adaptive";
    case ProtocolKind::KnownBasis: return "known";
  }
  return "?";
}

inline ProtocolKind parse_protocol(std::string_view s) {
  if (s == "static") return ProtocolKind::Static;
  if (s == "adaptive") return ProtocolKind::Adaptive;
  if (s == "known" || s == "known-basis") return ProtocolKind::KnownBasis;
  throw std::invalid_argument("unknown protocol '" + std::string(s) + "'");
}

struct TrialResult {
  Estimate estimate;
  double infidelity = 0.0;
  Shots n_used = 0;
  MeasurementModel configuration;
};

namespace detail {

inline void require_shots(const MeasurementModel& m, Shots n, Shots minimum_sic,
                          Shots minimum_mub) {
  const Shots minimum = family_of(m) == Family::Sic ? minimum_sic : minimum_mub;
  if (n < minimum)
    throw std::invalid_argument("insufficient shots: " + std::to_string(n) + " < " +
                                std::to_string(minimum));
}

inline TrialResult measure_and_estimate(const QubitState& s, const MeasurementModel& m, Shots n,
                                        RngStream& rng) {
  TrialResult r;
  const CountRecord counts = sample_record(m, s.bloch(), n, rng);
  r.estimate = mle(m, counts);
  r.infidelity = infidelity(s, r.estimate.mle);
  r.n_used = n;
  r.configuration = m;
  return r;
}

}  // namespace detail

/// All n shots in the given (unrotated) configuration.
inline TrialResult run_static(const QubitState& s, const MeasurementModel& m, Shots n,
                              RngStream& rng) {
  detail::require_shots(m, n, 4, 3);
  return detail::measure_and_estimate(s, m, n, rng);
}

/// Which counts enter the final adaptive estimate.
enum class AdaptiveFinal { SecondBatch, Pooled };

inline std::string_view to_string(AdaptiveFinal a) {
  return a == AdaptiveFinal::Pooled ? "pooled" : "second";
}

inline AdaptiveFinal parse_adaptive_final(std::string_view s) {
  if (s == "second") return AdaptiveFinal::SecondBatch;
  if (s == "pooled") return AdaptiveFinal::Pooled;
  throw std::invalid_argument("unknown adaptive estimate '" + std::string(s) + "'");
}

/// floor(n/2) shots measured statically give a pre-estimate; the measurement is
/// then aligned to it for the remaining shots. By default the final estimate
/// uses the aligned batch only; `Pooled` maximises the joint likelihood of both.
inline TrialResult run_adaptive(const QubitState& s, const MeasurementModel& m, Shots n,
                                RngStream& rng, AdaptiveFinal final = AdaptiveFinal::SecondBatch) {
  detail::require_shots(m, n, 8, 8);
  const Shots first = n / 2;
  const CountRecord first_counts = sample_record(m, s.bloch(), first, rng);
  const Estimate pre = mle(m, first_counts);
  const BlochVector direction = pre.mle.bloch();
  const MeasurementModel aligned =
      direction.norm() < 1e-9 ? m : align_optimal(m, direction);
  TrialResult r;
  if (final == AdaptiveFinal::SecondBatch) {
    r = detail::measure_and_estimate(s, aligned, n - first, rng);
  } else {
    const Batch batches[] = {{m, first_counts}, {aligned, sample_record(aligned, s.bloch(), n - first, rng)}};
    r.estimate = mle(std::span<const Batch>(batches));
    r.infidelity = infidelity(s, r.estimate.mle);
    r.configuration = aligned;
  }
  r.n_used = n;
  return r;
}

/// Idealised benchmark: the measurement is aligned using the true state.
inline TrialResult run_known_basis(const QubitState& s, const MeasurementModel& m, Shots n,
                                   RngStream& rng) {
  detail::require_shots(m, n, 4, 3);
  const MeasurementModel aligned = s.bloch().norm() < 1e-12 ? m : align_optimal(m, s.bloch());
  return detail::measure_and_estimate(s, aligned, n, rng);
}

inline TrialResult run_trial(ProtocolKind kind, const QubitState& s, const MeasurementModel& m,
                             Shots n, RngStream& rng,
                             AdaptiveFinal final = AdaptiveFinal::SecondBatch) {
  switch (kind) {
    case ProtocolKind::Static: return run_static(s, m, n, rng);
    case ProtocolKind::Adaptive: return run_adaptive(s, m, n, rng, final);
    case ProtocolKind::KnownBasis: return run_known_basis(s, m, n, rng);
  }
  throw std::invalid_argument("run_trial: unknown protocol");
}

}  // namespace qtomo
