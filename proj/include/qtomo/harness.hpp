#pragma once

// Monte Carlo sweeps of mean infidelity against N, power-law fits, the exact
// small-N expectation oracle and the figure reproduction drivers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "qtomo/estimator.hpp"
#include "qtomo/protocol.hpp"
#include "qtomo/theory.hpp"

namespace qtomo {

/// Log-spaced integer grid from 10^lo to 10^hi; duplicates after rounding are dropped.
inline std::vector<Shots> log_grid(double log10_lo, double log10_hi, int points) {
  if (points < 1 || log10_hi < log10_lo) throw std::invalid_argument("log_grid: bad range");
  std::vector<Shots> out;
  for (int i = 0; i < points; ++i) {
    const double e = points == 1 ? log10_lo : log10_lo + (log10_hi - log10_lo) * i / (points - 1);
    const auto n = static_cast<Shots>(std::llround(std::pow(10.0, e)));
    if (out.empty() || n > out.back()) out.push_back(n);
  }
  return out;
}

/// Worker count from QTOMO_WORKERS, else the hardware concurrency.
inline unsigned default_workers() {
  if (const char* env = std::getenv("QTOMO_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on `workers` threads. Each index is handled
/// exactly once; callers write results into per-index slots.
inline void parallel_for(std::size_t count, unsigned workers,
                         const std::function<void(std::size_t)>& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next.store(count);
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct SweepSpec {
  QubitState state;
  std::string state_id = "state";
  Family measurement = Family::Sic;
  std::vector<ProtocolKind> protocols{ProtocolKind::Static};
  std::vector<Shots> n_grid;
  int repetitions = 200;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  AdaptiveFinal adaptive_final = AdaptiveFinal::SecondBatch;

  void validate() const {
    if (repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
    if (protocols.empty()) throw std::invalid_argument("no protocols requested");
    if (n_grid.empty()) throw std::invalid_argument("empty N grid");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
      if (n_grid[i] <= n_grid[i - 1]) throw std::invalid_argument("N grid must be strictly increasing");
  }
};

struct SweepRow {
  ProtocolKind protocol = ProtocolKind::Static;
  Shots n = 0;
  double mean_infidelity = 0.0;
  double std_error = 0.0;
  int repetitions = 0;
  int excluded = 0;
};

struct SweepResult {
  Family measurement = Family::Sic;
  std::string state_id;
  std::vector<SweepRow> rows;

  std::vector<SweepRow> protocol_rows(ProtocolKind k) const {
    std::vector<SweepRow> out;
    for (const auto& r : rows)
      if (r.protocol == k) out.push_back(r);
    return out;
  }

  const SweepRow& at(ProtocolKind k, Shots n) const {
    for (const auto& r : rows)
      if (r.protocol == k && r.n == n) return r;
    throw std::out_of_range("no sweep row for N = " + std::to_string(n));
  }

  /// Rows where more than 1% of trials were excluded for non-convergence.
  int flagged_rows() const {
    int bad = 0;
    for (const auto& r : rows)
      if (r.excluded * 100 > (r.repetitions + r.excluded)) ++bad;
    return bad;
  }
};

/// Tag mixed into a task's stream id: protocol in the top byte, N below it.
constexpr std::uint64_t protocol_tag(ProtocolKind k, Shots n) {
  return (static_cast<std::uint64_t>(k) + 1) << 56 ^ static_cast<std::uint64_t>(n);
}

/// Mean and standard error of the per-trial infidelity at every (protocol, N).
/// Trial (protocol, N, r) draws from RngStream(seed, task_stream_id(r, tag));
/// results are reduced in repetition order, so the worker count does not matter.
inline SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  const MeasurementModel model = canonical_model(spec.measurement);
  const std::size_t reps = static_cast<std::size_t>(spec.repetitions);
  const std::size_t cells = spec.protocols.size() * spec.n_grid.size();

  struct Slot {
    double infidelity = 0.0;
    bool converged = true;
  };
  std::vector<Slot> slots(cells * reps);
  parallel_for(slots.size(), spec.workers, [&](std::size_t idx) {
    const std::size_t cell = idx / reps;
    const std::size_t rep = idx % reps;
    const ProtocolKind kind = spec.protocols[cell / spec.n_grid.size()];
    const Shots n = spec.n_grid[cell % spec.n_grid.size()];
    RngStream rng(spec.seed, task_stream_id(rep, protocol_tag(kind, n)));
    const TrialResult t = run_trial(kind, spec.state, model, n, rng, spec.adaptive_final);
    slots[idx] = {t.infidelity, t.estimate.converged};
  });

  SweepResult out{spec.measurement, spec.state_id, {}};
  for (std::size_t cell = 0; cell < cells; ++cell) {
    SweepRow row;
    row.protocol = spec.protocols[cell / spec.n_grid.size()];
    row.n = spec.n_grid[cell % spec.n_grid.size()];
    double sum = 0.0;
    double sum2 = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const Slot& s = slots[cell * reps + r];
      if (!s.converged) {
        ++row.excluded;
        continue;
      }
      ++row.repetitions;
      sum += s.infidelity;
    }
    if (row.repetitions > 0) {
      row.mean_infidelity = sum / row.repetitions;
      for (std::size_t r = 0; r < reps; ++r) {
        const Slot& s = slots[cell * reps + r];
        if (s.converged) sum2 += (s.infidelity - row.mean_infidelity) * (s.infidelity - row.mean_infidelity);
      }
      if (row.repetitions > 1)
        row.std_error = std::sqrt(sum2 / (row.repetitions - 1)) / std::sqrt(row.repetitions);
    }
    out.rows.push_back(row);
  }
  return out;
}

struct PowerLawFit {
  double alpha = 0.0;
  double c = 0.0;
  double alpha_stderr = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of log10(mean) on log10(N): mean = c N^alpha.
inline PowerLawFit fit_power_law(std::span<const double> n, std::span<const double> mean) {
  if (n.size() != mean.size()) throw std::invalid_argument("fit_power_law: size mismatch");
  if (n.size() < 3) throw std::invalid_argument("fit_power_law: need at least 3 rows");
  const auto k = static_cast<double>(n.size());
  std::vector<double> x, y;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0.0) || !(mean[i] > 0.0))
      throw std::invalid_argument("fit_power_law: non-positive value");
    x.push_back(std::log10(n[i]));
    y.push_back(std::log10(mean[i]));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_power_law: all N identical");
  PowerLawFit fit;
  fit.alpha = sxy / sxx;
  const double intercept = my - fit.alpha * mx;
  fit.c = std::pow(10.0, intercept);
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (intercept + fit.alpha * x[i]);
    ssr += r * r;
  }
  fit.alpha_stderr = std::sqrt(ssr / (k - 2.0) / sxx);
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return fit;
}

inline PowerLawFit fit_power_law(std::span<const SweepRow> rows) {
  std::vector<double> n, m;
  for (const auto& r : rows) {
    n.push_back(static_cast<double>(r.n));
    m.push_back(r.mean_infidelity);
  }
  return fit_power_law(n, m);
}

/// Local log-log slope at each row (central differences, one-sided at the ends).
inline std::vector<double> local_slopes(std::span<const SweepRow> rows) {
  std::vector<double> out(rows.size(), 0.0);
  if (rows.size() < 2) return out;
  auto lx = [&](std::size_t i) { return std::log10(static_cast<double>(rows[i].n)); };
  auto ly = [&](std::size_t i) { return std::log10(rows[i].mean_infidelity); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == rows.size() ? i : i + 1;
    out[i] = (ly(b) - ly(a)) / (lx(b) - lx(a));
  }
  return out;
}

/// Empirical turning region: from the flattest point of the curve (the
/// plateau, where the local slope is largest) to the first later N where the
/// slope has steepened past `steep`. At desk-scale eigenvalues the plateau is
/// never truly flat, so no absolute flatness threshold is imposed.
inline std::optional<std::pair<Shots, Shots>> turning_region(std::span<const SweepRow> rows,
                                                             double steep = -0.8) {
  if (rows.size() < 3) return std::nullopt;
  const auto slopes = local_slopes(rows);
  std::size_t flat = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (slopes[i] > slopes[flat]) flat = i;
  if (!(slopes[flat] > steep)) return std::nullopt;
  for (std::size_t i = flat + 1; i < rows.size(); ++i)
    if (slopes[i] < steep) return std::make_pair(rows[flat].n, rows[i].n);
  return std::nullopt;
}

namespace detail {

inline double log_factorial(Shots n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// Probability-weighted sum of f(record) over every count record of `m` with
// the given per-setting shot totals.
template <class F>
double enumerate_records(const std::vector<std::vector<double>>& probs,
                         const std::vector<Shots>& shots, const F& f) {
  const std::size_t settings = probs.size();
  std::vector<std::vector<std::pair<std::vector<Shots>, double>>> support(settings);
  for (std::size_t s = 0; s < settings; ++s) {
    const auto& p = probs[s];
    const Shots n = shots[s];
    std::vector<Shots> counts(p.size(), 0);
    // Compositions of n into p.size() parts, first index slowest.
    std::function<void(std::size_t, Shots)> rec = [&](std::size_t i, Shots left) {
      if (i + 1 == p.size()) {
        counts[i] = left;
        double lw = log_factorial(n);
        for (std::size_t k = 0; k < p.size(); ++k) {
          lw -= log_factorial(counts[k]);
          if (counts[k] > 0) {
            if (p[k] <= 0.0) return;
            lw += static_cast<double>(counts[k]) * std::log(p[k]);
          }
        }
        support[s].emplace_back(counts, std::exp(lw));
        return;
      }
      for (Shots c = 0; c <= left; ++c) {
        counts[i] = c;
        rec(i + 1, left - c);
      }
    };
    rec(0, n);
  }
  double total = 0.0;
  CountRecord record;
  record.shots = shots;
  record.settings.resize(settings);
  std::function<void(std::size_t, double)> product = [&](std::size_t s, double w) {
    if (s == settings) {
      total += w * f(record);
      return;
    }
    for (const auto& [counts, weight] : support[s]) {
      record.settings[s] = counts;
      product(s + 1, w * weight);
    }
  };
  product(0, 1.0);
  return total;
}

}  // namespace detail

/// Exact mean infidelity of the MLE over the multinomial distribution of counts.
/// Bounds: SIC n <= 200; MUB at most 60 shots per basis.
inline double exact_expected_infidelity(const QubitState& s, const MeasurementModel& m,
                                        ProtocolKind protocol, Shots n) {
  if (protocol == ProtocolKind::Adaptive)
    throw std::invalid_argument("exact_expected_infidelity: adaptive protocol is not enumerable");
  if (n < static_cast<Shots>(setting_count(m)))
    throw std::invalid_argument("exact_expected_infidelity: too few shots");
  const MeasurementModel model = protocol == ProtocolKind::KnownBasis && s.bloch().norm() >= 1e-12
                                     ? align_optimal(m, s.bloch())
                                     : m;
  const auto shots = allocate_shots(n, setting_count(model));
  const Shots limit = family_of(model) == Family::Sic ? 200 : 60;
  for (Shots k : shots)
    if (k > limit) throw std::out_of_range("exact_expected_infidelity: enumeration bound exceeded");
  return detail::enumerate_records(probabilities(model, s.bloch()), shots,
                                   [&](const CountRecord& c) { return infidelity(s, mle(model, c).mle); });
}

// ---------------------------------------------------------------------------
// Figure reproduction

enum class Scale { Desk, Paper };

inline Scale parse_scale(std::string_view s) {
  if (s == "desk") return Scale::Desk;
  if (s == "paper") return Scale::Paper;
  throw std::invalid_argument("unknown scale '" + std::string(s) + "'");
}

/// Named states used by the reproduction drivers.
namespace states {

inline QubitState rho1_pure() { return QubitState{{0.0, 0.0, 1.0}}; }
inline QubitState rho2_pure() {
  const double k = 1.0 / std::sqrt(3.0);
  return QubitState{{k, k, k}};
}
inline QubitState mixed() { return QubitState::maximally_mixed(); }

/// Pure state tilted from -z by angle theta (towards +y), scaled to smaller
/// eigenvalue lambda. cos(theta) = 1 is the SIC-optimal direction.
inline QubitState misaligned(double cos_theta, double lambda) {
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  return depolarize(QubitState{{0.0, sin_theta, -cos_theta}}, lambda);
}

}  // namespace states

struct Series {
  std::string label;
  double lambda = 0.0;
  SweepSpec spec;
  SweepResult result;
};

struct FitRow {
  std::string series;
  Family measurement;
  ProtocolKind protocol;
  PowerLawFit fit;
};

struct FigureRun {
  std::string tag;
  Scale scale = Scale::Desk;
  std::vector<Series> series;
  std::vector<FitRow> fits;
};

struct ReproduceOptions {
  Scale scale = Scale::Desk;
  std::uint64_t seed = 2024;
  std::optional<int> repetitions;
  unsigned workers = 1;
  AdaptiveFinal adaptive_final = AdaptiveFinal::SecondBatch;
};

inline const std::vector<std::string>& figure_tags() {
  static const std::vector<std::string> tags{"fig2a", "fig2b", "fig3a", "fig3b", "fig4",
                                             "fig5",  "fig7a", "fig7b", "fig8",  "fig9a",
                                             "fig9b", "table1"};
  return tags;
}

/// The experiment behind each figure, without running it.
inline std::vector<Series> figure_plan(std::string_view tag, const ReproduceOptions& opt) {
  const std::vector<ProtocolKind> all{ProtocolKind::Static, ProtocolKind::Adaptive,
                                      ProtocolKind::KnownBasis};
  const bool paper = opt.scale == Scale::Paper;
  const int reps = opt.repetitions.value_or(200);
  const auto pure_grid = log_grid(2.0, 4.5, 12);
  const double near_lambda = paper ? 0.0002 : 0.002;
  const auto near_grid = paper ? log_grid(2.0, 6.0, 12) : log_grid(1.5, 5.0, 12);
  const auto tilt_grid = paper ? log_grid(2.0, 6.0, 12) : log_grid(2.0, 5.0, 12);

  auto make = [&](std::string label, double lambda, QubitState st, Family f,
                  std::vector<ProtocolKind> protocols, std::vector<Shots> grid) {
    Series s;
    s.label = label;
    s.lambda = lambda;
    s.spec.state = st;
    s.spec.state_id = std::move(label);
    s.spec.measurement = f;
    s.spec.protocols = std::move(protocols);
    s.spec.n_grid = std::move(grid);
    s.spec.repetitions = reps;
    s.spec.seed = opt.seed;
    s.spec.workers = opt.workers;
    s.spec.adaptive_final = opt.adaptive_final;
    return s;
  };

  auto pure_sic = [&] { return make("rho1_pure", 0.0, states::rho1_pure(), Family::Sic, all, pure_grid); };
  auto pure_mub = [&] { return make("rho2_pure", 0.0, states::rho2_pure(), Family::Mub, all, pure_grid); };
  auto near_sic = [&] {
    return make("rho1_near", near_lambda, depolarize(states::rho1_pure(), near_lambda), Family::Sic,
                all, near_grid);
  };
  auto near_mub = [&] {
    return make("rho2_near", near_lambda, depolarize(states::rho2_pure(), near_lambda), Family::Mub,
                all, near_grid);
  };

  if (tag == "fig2a") return {pure_sic()};
  if (tag == "fig2b") return {pure_mub()};
  if (tag == "fig4" || tag == "table1") return {pure_sic(), pure_mub()};
  if (tag == "fig3a") return {make("mixed", 0.5, states::mixed(), Family::Sic, all, pure_grid)};
  if (tag == "fig3b") return {make("mixed", 0.5, states::mixed(), Family::Mub, all, pure_grid)};
  if (tag == "fig5") {
    auto s = near_sic();
    s.spec.protocols = {ProtocolKind::Adaptive};
    return {s};
  }
  if (tag == "fig7a") return {near_sic()};
  if (tag == "fig7b") return {near_mub()};
  if (tag == "fig8") return {near_sic(), near_mub()};
  if (tag == "fig9a")
    return {make("misaligned_pure", 0.0, states::misaligned(0.9996, 0.0), Family::Sic,
                 {ProtocolKind::Static}, tilt_grid),
            make("nearly_pure", 0.0002, states::misaligned(1.0, 0.0002), Family::Sic,
                 {ProtocolKind::Static}, tilt_grid)};
  if (tag == "fig9b") {
    std::vector<Series> out;
    for (double c : {1.0, 0.9996, 0.999, 0.998, 0.995}) {
      char label[32];
      std::snprintf(label, sizeof label, "cos_%.4f", c);
      out.push_back(make(label, 0.0002, states::misaligned(c, 0.0002), Family::Sic,
                         {ProtocolKind::Static}, tilt_grid));
    }
    return out;
  }
  throw std::invalid_argument("unknown figure tag '" + std::string(tag) + "'");
}

/// Runs every series of a figure and fits a power law to each protocol curve.
inline FigureRun reproduce(std::string_view tag, const ReproduceOptions& opt = {}) {
  FigureRun run;
  run.tag = std::string(tag);
  run.scale = opt.scale;
  run.series = figure_plan(tag, opt);
  for (auto& s : run.series) {
    s.result = run_sweep(s.spec);
    for (ProtocolKind k : s.spec.protocols) {
      const auto rows = s.result.protocol_rows(k);
      if (rows.size() < 3) continue;
      bool positive = true;
      for (const auto& r : rows) positive = positive && r.mean_infidelity > 0.0;
      if (positive) run.fits.push_back({s.label, s.spec.measurement, k, fit_power_law(rows)});
    }
  }
  return run;
}

}  // namespace qtomo
