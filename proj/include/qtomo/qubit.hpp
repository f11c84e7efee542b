#pragma once

// Single-qubit states in Bloch and matrix form, plus fidelity metrics.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace qtomo {

inline constexpr double kPhysicalTol = 1e-12;

/// Raw Bloch coordinates (Pauli expectation values). The norm is unconstrained
/// so that linear-inversion estimates outside the ball can be represented.
struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
  constexpr double norm2() const { return x * x + y * y + z * z; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  friend constexpr BlochVector operator+(BlochVector a, BlochVector b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend constexpr BlochVector operator-(BlochVector a, BlochVector b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend constexpr BlochVector operator-(BlochVector a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr BlochVector operator*(double k, BlochVector a) {
    return {k * a.x, k * a.y, k * a.z};
  }
  friend constexpr BlochVector operator*(BlochVector a, double k) { return k * a; }
  friend constexpr BlochVector operator/(BlochVector a, double k) {
    return {a.x / k, a.y / k, a.z / k};
  }
  BlochVector& operator+=(BlochVector b) {
    x += b.x;
    y += b.y;
    z += b.z;
    return *this;
  }
  friend constexpr bool operator==(const BlochVector&, const BlochVector&) = default;
};

constexpr double dot(BlochVector a, BlochVector b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr BlochVector cross(BlochVector a, BlochVector b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline BlochVector normalized(BlochVector a) {
  const double n = a.norm();
  if (n == 0.0) throw std::invalid_argument("cannot normalize a zero vector");
  return a / n;
}

/// Proper or improper 3x3 real matrix acting on Bloch vectors (row-major).
struct Rotation {
  std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  static Rotation identity() { return {}; }

  /// Rodrigues rotation by `angle` about the unit vector `axis`.
  static Rotation about(BlochVector axis, double angle) {
    const BlochVector k = normalized(axis);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double t = 1.0 - c;
    Rotation r;
    r.m = {{{c + t * k.x * k.x, t * k.x * k.y - s * k.z, t * k.x * k.z + s * k.y},
            {t * k.y * k.x + s * k.z, c + t * k.y * k.y, t * k.y * k.z - s * k.x},
            {t * k.z * k.x - s * k.y, t * k.z * k.y + s * k.x, c + t * k.z * k.z}}};
    return r;
  }

  BlochVector operator()(BlochVector v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  friend Rotation operator*(const Rotation& a, const Rotation& b) {
    Rotation r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += a.m[i][k] * b.m[k][j];
        r.m[i][j] = acc;
      }
    return r;
  }

  double determinant() const {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }
};

/// 2x2 complex matrix, row-major: {m00, m01, m10, m11}.
struct DensityMatrix {
  using complex = std::complex<double>;
  std::array<complex, 4> e{};

  constexpr complex& operator()(int r, int c) { return e[2 * r + c]; }
  constexpr const complex& operator()(int r, int c) const { return e[2 * r + c]; }

  complex trace() const { return e[0] + e[3]; }
  complex determinant() const { return e[0] * e[3] - e[1] * e[2]; }

  bool is_hermitian(double tol = kPhysicalTol) const {
    return std::abs(e[0].imag()) <= tol && std::abs(e[3].imag()) <= tol &&
           std::abs(e[1] - std::conj(e[2])) <= tol;
  }
};

inline DensityMatrix operator*(const DensityMatrix& a, const DensityMatrix& b) {
  DensityMatrix r;
  r.e[0] = a.e[0] * b.e[0] + a.e[1] * b.e[2];
  r.e[1] = a.e[0] * b.e[1] + a.e[1] * b.e[3];
  r.e[2] = a.e[2] * b.e[0] + a.e[3] * b.e[2];
  r.e[3] = a.e[2] * b.e[1] + a.e[3] * b.e[3];
  return r;
}

/// rho = (I + s.sigma) / 2
inline DensityMatrix bloch_to_density(BlochVector s) {
  DensityMatrix rho;
  rho(0, 0) = {0.5 * (1.0 + s.z), 0.0};
  rho(0, 1) = {0.5 * s.x, -0.5 * s.y};
  rho(1, 0) = {0.5 * s.x, 0.5 * s.y};
  rho(1, 1) = {0.5 * (1.0 - s.z), 0.0};
  return rho;
}

/// Inverse of bloch_to_density. Throws on non-Hermitian or non-unit-trace input.
inline BlochVector density_to_bloch(const DensityMatrix& rho) {
  if (!rho.is_hermitian()) throw std::invalid_argument("density matrix is not Hermitian");
  if (std::abs(rho.trace() - 1.0) > kPhysicalTol)
    throw std::invalid_argument("density matrix does not have unit trace");
  return {2.0 * rho(1, 0).real(), 2.0 * rho(1, 0).imag(),
          (rho(0, 0) - rho(1, 1)).real()};
}

/// A physical qubit state, |bloch| <= 1 (with a 1e-12 slack for rounding).
class QubitState {
 public:
  QubitState() = default;

  explicit QubitState(BlochVector s) : bloch_(s) {
    if (!s.finite()) throw std::invalid_argument("Bloch vector has non-finite components");
    if (s.norm() > 1.0 + kPhysicalTol)
      throw std::domain_error("unphysical Bloch vector, |s| = " + std::to_string(s.norm()));
  }

  static QubitState maximally_mixed() { return QubitState{}; }

  const BlochVector& bloch() const { return bloch_; }
  double length() const { return std::min(1.0, bloch_.norm()); }
  double purity() const { return 0.5 * (1.0 + bloch_.norm2()); }
  double smaller_eigenvalue() const { return 0.5 * (1.0 - length()); }
  double larger_eigenvalue() const { return 0.5 * (1.0 + length()); }
  DensityMatrix density() const { return bloch_to_density(bloch_); }

  friend bool operator==(const QubitState&, const QubitState&) = default;

 private:
  BlochVector bloch_{};
};

/// Radial projection onto the Bloch ball.
inline QubitState project_to_ball(BlochVector s) {
  const double n = s.norm();
  return QubitState{n > 1.0 ? s / n : s};
}

/// Uhlmann infidelity 1 - [Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2 through the 2x2
/// identity F = Tr(rho sigma) + 2 sqrt(det rho det sigma).
inline double infidelity_general(const DensityMatrix& rho, const DensityMatrix& sigma) {
  const double overlap = (rho * sigma).trace().real();
  const double dets = std::max(0.0, rho.determinant().real()) *
                      std::max(0.0, sigma.determinant().real());
  const double f = overlap + 2.0 * std::sqrt(dets);
  return std::clamp(1.0 - f, 0.0, 1.0);
}

/// Infidelity in Bloch form: (1 - s.t - sqrt(1 - |s|^2) sqrt(1 - |t|^2)) / 2.
inline double infidelity_bloch(BlochVector s, BlochVector est) {
  const double s2 = s.norm2();
  const double e2 = est.norm2();
  if (s2 > (1.0 + kPhysicalTol) * (1.0 + kPhysicalTol) ||
      e2 > (1.0 + kPhysicalTol) * (1.0 + kPhysicalTol))
    throw std::domain_error("infidelity_bloch: unphysical Bloch vector");
  const double mixed = std::sqrt(std::max(0.0, 1.0 - s2)) * std::sqrt(std::max(0.0, 1.0 - e2));
  return std::clamp(0.5 * (1.0 - dot(s, est) - mixed), 0.0, 1.0);
}

inline double infidelity(const QubitState& a, const QubitState& b) {
  return infidelity_bloch(a.bloch(), b.bloch());
}

/// Shrinks a pure state towards the maximally mixed state so that its smaller
/// eigenvalue is exactly `lambda`: s -> (1 - 2 lambda) s.
inline QubitState depolarize(const QubitState& pure, double lambda) {
  if (std::abs(pure.bloch().norm() - 1.0) > 1e-9)
    throw std::invalid_argument("depolarize expects a pure state");
  if (!(lambda >= 0.0 && lambda <= 0.5))
    throw std::domain_error("depolarize: lambda must lie in [0, 1/2]");
  return QubitState{(1.0 - 2.0 * lambda) * pure.bloch()};
}

}  // namespace qtomo
