#pragma once

// Measurement geometry: the qubit SIC tetrahedron and the three Pauli MUB axes.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "qtomo/qubit.hpp"

namespace qtomo {

enum class Family { Sic, Mub };

inline std::string_view to_string(Family f) { return f == Family::Sic ? "sic" : "mub"; }

inline Family parse_family(std::string_view s) {
  if (s == "sic") return Family::Sic;
  if (s == "mub") return Family::Mub;
  throw std::invalid_argument("unknown measurement family '" + std::string(s) + "'");
}

/// Bloch directions a_i of the SIC projectors; effect E_i = (I + a_i.sigma) / 4.
struct SicModel {
  std::array<BlochVector, 4> directions;
};

/// Three orthonormal axes; axis b yields the projector pair (I +- u_b.sigma) / 2.
struct MubModel {
  std::array<BlochVector, 3> axes;
};

using MeasurementModel = std::variant<SicModel, MubModel>;

inline Family family_of(const MeasurementModel& m) {
  return std::holds_alternative<SicModel>(m) ? Family::Sic : Family::Mub;
}

inline SicModel canonical_sic() {
  const double r2 = std::sqrt(2.0);
  const double r6 = std::sqrt(6.0);
  return SicModel{{BlochVector{0.0, 0.0, 1.0}, BlochVector{2.0 * r2 / 3.0, 0.0, -1.0 / 3.0},
                   BlochVector{-r2 / 3.0, r6 / 3.0, -1.0 / 3.0},
                   BlochVector{-r2 / 3.0, -r6 / 3.0, -1.0 / 3.0}}};
}

inline MubModel canonical_mub() {
  return MubModel{{BlochVector{1, 0, 0}, BlochVector{0, 1, 0}, BlochVector{0, 0, 1}}};
}

inline MeasurementModel canonical_model(Family f) {
  if (f == Family::Sic) return canonical_sic();
  return canonical_mub();
}

inline bool satisfies_invariants(const SicModel& m, double tol = 1e-12) {
  BlochVector sum{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (std::abs(m.directions[i].norm() - 1.0) > tol) return false;
    for (std::size_t j = i + 1; j < 4; ++j)
      if (std::abs(dot(m.directions[i], m.directions[j]) + 1.0 / 3.0) > tol) return false;
    sum += m.directions[i];
  }
  return sum.norm() <= tol;
}

inline bool satisfies_invariants(const MubModel& m, double tol = 1e-12) {
  for (std::size_t i = 0; i < 3; ++i) {
    if (std::abs(m.axes[i].norm() - 1.0) > tol) return false;
    for (std::size_t j = i + 1; j < 3; ++j)
      if (std::abs(dot(m.axes[i], m.axes[j])) > tol) return false;
  }
  return true;
}

inline bool satisfies_invariants(const MeasurementModel& m, double tol = 1e-12) {
  return std::visit([tol](const auto& v) { return satisfies_invariants(v, tol); }, m);
}

/// Number of separately-sampled settings: one for SIC, three for MUB.
inline std::size_t setting_count(const MeasurementModel& m) {
  return std::holds_alternative<SicModel>(m) ? 1 : 3;
}

/// One measurement outcome: probability weight * (1 + direction . s).
struct Outcome {
  BlochVector direction;
  double weight;
  std::size_t setting;
  std::size_t index;
};

/// Flattened outcome list, ordered setting by setting.
inline std::vector<Outcome> outcomes(const MeasurementModel& m) {
  std::vector<Outcome> out;
  if (const auto* sic = std::get_if<SicModel>(&m)) {
    for (std::size_t i = 0; i < 4; ++i) out.push_back({sic->directions[i], 0.25, 0, i});
  } else {
    const auto& mub = std::get<MubModel>(m);
    for (std::size_t b = 0; b < 3; ++b) {
      out.push_back({mub.axes[b], 0.5, b, 0});
      out.push_back({-mub.axes[b], 0.5, b, 1});
    }
  }
  return out;
}

/// Born-rule probabilities per setting. SIC: {p_0..p_3}; MUB: {{p_+, p_-}} x 3.
inline std::vector<std::vector<double>> probabilities(const MeasurementModel& m, BlochVector s) {
  if (!s.finite() || s.norm() > 1.0 + kPhysicalTol)
    throw std::domain_error("probabilities: unphysical Bloch vector");
  if (const auto* sic = std::get_if<SicModel>(&m)) {
    std::vector<double> p(4);
    for (std::size_t i = 0; i < 4; ++i)
      p[i] = std::max(0.0, 0.25 * (1.0 + dot(sic->directions[i], s)));
    return {p};
  }
  const auto& mub = std::get<MubModel>(m);
  std::vector<std::vector<double>> out;
  for (const auto& u : mub.axes) {
    const double c = dot(u, s);
    out.push_back({std::max(0.0, 0.5 * (1.0 + c)), std::max(0.0, 0.5 * (1.0 - c))});
  }
  return out;
}

/// Proper rotation R with R(from) = to. Antiparallel inputs rotate by pi about the
/// coordinate axis least aligned with `from`, orthogonalised against it.
inline Rotation rotation_between(BlochVector from, BlochVector to) {
  from = normalized(from);
  to = normalized(to);
  const double c = dot(from, to);
  if (c < -1.0 + 1e-12) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i)
      if (std::abs(from[i]) < std::abs(from[best])) best = i;
    BlochVector e{};
    e[best] = 1.0;
    const BlochVector axis = normalized(e - dot(e, from) * from);
    return Rotation::about(axis, M_PI);
  }
  const BlochVector k = cross(from, to);
  const double s = k.norm();
  if (s < 1e-15) return Rotation::identity();
  return Rotation::about(k / s, std::atan2(s, c));
}

inline SicModel rotated(const SicModel& m, const Rotation& r) {
  SicModel out = m;
  for (auto& a : out.directions) a = r(a);
  return out;
}

inline MubModel rotated(const MubModel& m, const Rotation& r) {
  MubModel out = m;
  for (auto& u : out.axes) u = r(u);
  return out;
}

inline MeasurementModel rotated(const MeasurementModel& m, const Rotation& r) {
  return std::visit([&r](const auto& v) -> MeasurementModel { return rotated(v, r); }, m);
}

/// Rotates the measurement into the optimal configuration for `target`: the first
/// SIC direction antiparallel to it, or the third MUB axis along it.
inline MeasurementModel align_optimal(const MeasurementModel& m, BlochVector target) {
  if (target.norm() == 0.0) throw std::invalid_argument("align_optimal: zero target direction");
  const BlochVector t = normalized(target);
  if (const auto* sic = std::get_if<SicModel>(&m))
    return rotated(*sic, rotation_between(sic->directions[0], -t));
  const auto& mub = std::get<MubModel>(m);
  return rotated(mub, rotation_between(mub.axes[2], t));
}

}  // namespace qtomo
