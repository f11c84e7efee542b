#pragma once

// Reproducible outcome sampling. Counts are drawn as a chain of exact binomials
// so the cost per record does not grow with the number of shots.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "qtomo/povm.hpp"

namespace qtomo {

using Shots = std::int64_t;

/// A deterministic random stream identified by (seed, stream id).
///
/// The engine is std::mt19937_64 seeded through std::seed_seq from the four
/// 32-bit halves of the pair; both are fully specified by the standard, so the
/// sequence of raw words is identical across platforms. Uniform variates are
/// formed from the top 53 bits rather than through std:: distributions, whose
/// algorithms are implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream_id),
                      static_cast<std::uint32_t>(stream_id >> 32)};
    engine_.seed(seq);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  std::uint64_t next() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

inline constexpr std::uint64_t kStreamMultiplier = 0x9E3779B97F4A7C15ULL;

/// Stream id of one Monte Carlo task: repetition * odd constant, xor a tag that
/// identifies the protocol (and grid point) the task belongs to.
constexpr std::uint64_t task_stream_id(std::uint64_t repetition, std::uint64_t tag) {
  return (repetition * kStreamMultiplier) ^ tag;
}

namespace detail {

// Sequential inversion from k = 0, for small means (n p < 10, p <= 1/2).
inline Shots binomial_inversion(Shots n, double p, RngStream& rng) {
  const double q = 1.0 - p;
  const double s = p / q;
  const double a = static_cast<double>(n + 1) * s;
  const double r0 = std::exp(static_cast<double>(n) * std::log1p(-p));
  for (;;) {
    double r = r0;
    double u = rng.uniform();
    Shots x = 0;
    while (u > r) {
      u -= r;
      ++x;
      if (x > n) break;
      r *= a / static_cast<double>(x) - s;
    }
    if (x <= n) return x;
  }
}

// Hormann's BTRS transformed rejection with squeeze (exact), for n p >= 10.
inline Shots binomial_btrs(Shots n, double p, RngStream& rng) {
  const double nd = static_cast<double>(n);
  const double q = 1.0 - p;
  const double spq = std::sqrt(nd * p * q);
  const double b = 1.15 + 2.53 * spq;
  const double a = -0.0873 + 0.0248 * b + 0.01 * p;
  const double c = nd * p + 0.5;
  const double v_r = 0.92 - 4.2 / b;
  const double alpha = (2.83 + 5.1 / b) * spq;
  const double lpq = std::log(p / q);
  const double m = std::floor((nd + 1.0) * p);
  const double h = std::lgamma(m + 1.0) + std::lgamma(nd - m + 1.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + c);
    if (k < 0.0 || k > nd) continue;
    if (us >= 0.07 && v <= v_r) return static_cast<Shots>(k);
    v = std::log(v * alpha / (a / (us * us) + b));
    const double bound = h - std::lgamma(k + 1.0) - std::lgamma(nd - k + 1.0) + (k - m) * lpq;
    if (v <= bound) return static_cast<Shots>(k);
  }
}

}  // namespace detail

/// Exact Binomial(n, p) draw.
inline Shots sample_binomial(Shots n, double p, RngStream& rng) {
  if (n < 0) throw std::invalid_argument("sample_binomial: negative trial count");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sample_binomial: p outside [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - sample_binomial(n, 1.0 - p, rng);
  if (static_cast<double>(n) * p < 10.0) return detail::binomial_inversion(n, p, rng);
  return detail::binomial_btrs(n, p, rng);
}

/// Multinomial(n, p) through the conditional-binomial chain.
inline std::vector<Shots> sample_counts(std::span<const double> p, Shots n, RngStream& rng) {
  if (p.empty()) throw std::invalid_argument("sample_counts: empty probability vector");
  if (n < 0) throw std::invalid_argument("sample_counts: negative shot count");
  double total = 0.0;
  for (double pi : p) {
    if (!(pi >= -1e-12) || !std::isfinite(pi))
      throw std::invalid_argument("sample_counts: negative or non-finite probability");
    total += pi;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("sample_counts: probabilities do not sum to 1");

  std::vector<Shots> counts(p.size(), 0);
  Shots remaining = n;
  double mass = 1.0;
  for (std::size_t i = 0; i + 1 < p.size() && remaining > 0; ++i) {
    const double pi = std::max(0.0, p[i]);
    const double cond = mass > 0.0 ? std::min(1.0, pi / mass) : 1.0;
    counts[i] = sample_binomial(remaining, cond, rng);
    remaining -= counts[i];
    mass -= pi;
  }
  counts.back() += remaining;
  return counts;
}

/// Even split of a shot budget; the first (n_total mod settings) settings get one extra.
inline std::vector<Shots> allocate_shots(Shots n_total, std::size_t settings) {
  if (n_total < 0) throw std::invalid_argument("allocate_shots: negative budget");
  if (settings == 0) throw std::invalid_argument("allocate_shots: no settings");
  const auto k = static_cast<Shots>(settings);
  std::vector<Shots> out(settings, n_total / k);
  for (Shots i = 0; i < n_total % k; ++i) ++out[static_cast<std::size_t>(i)];
  return out;
}

/// Outcome counts per measurement setting together with each setting's shot total.
struct CountRecord {
  std::vector<std::vector<Shots>> settings;
  std::vector<Shots> shots;

  Shots total() const { return std::accumulate(shots.begin(), shots.end(), Shots{0}); }

  bool valid() const {
    if (settings.size() != shots.size()) return false;
    for (std::size_t s = 0; s < settings.size(); ++s) {
      Shots sum = 0;
      for (Shots c : settings[s]) {
        if (c < 0) return false;
        sum += c;
      }
      if (sum != shots[s]) return false;
    }
    return true;
  }

  friend bool operator==(const CountRecord&, const CountRecord&) = default;
};

/// Builds a record from raw per-setting counts, deriving the shot totals.
inline CountRecord make_record(std::vector<std::vector<Shots>> settings) {
  CountRecord r;
  r.shots.reserve(settings.size());
  for (const auto& s : settings) {
    for (Shots c : s)
      if (c < 0) throw std::invalid_argument("make_record: negative count");
    r.shots.push_back(std::accumulate(s.begin(), s.end(), Shots{0}));
  }
  r.settings = std::move(settings);
  return r;
}

inline std::vector<std::vector<double>> frequencies(const CountRecord& c) {
  if (!c.valid()) throw std::invalid_argument("frequencies: inconsistent count record");
  std::vector<std::vector<double>> f;
  f.reserve(c.settings.size());
  for (std::size_t s = 0; s < c.settings.size(); ++s) {
    if (c.shots[s] <= 0) throw std::invalid_argument("frequencies: setting with zero shots");
    std::vector<double> row;
    row.reserve(c.settings[s].size());
    for (Shots n : c.settings[s])
      row.push_back(static_cast<double>(n) / static_cast<double>(c.shots[s]));
    f.push_back(std::move(row));
  }
  return f;
}

/// Measures `n_total` copies of the state with every setting of `m`.
inline CountRecord sample_record(const MeasurementModel& m, BlochVector s, Shots n_total,
                                 RngStream& rng) {
  const auto probs = probabilities(m, s);
  CountRecord r;
  r.shots = allocate_shots(n_total, probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k)
    r.settings.push_back(sample_counts(probs[k], r.shots[k], rng));
  return r;
}

}  // namespace qtomo
