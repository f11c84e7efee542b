// qtomo: command-line front end for sweeps, predictions, fits, figure
// reproduction and the exact small-N oracle.
//
// Exit codes: 0 success, 1 unexpected failure, 2 invalid input,
// 3 sweep finished but some rows exceeded the non-convergence threshold.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qtomo/qtomo.hpp"

namespace fs = std::filesystem;
using namespace qtomo;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitFlagged = 3;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

// "1e2:1e6" -> (100, 1e6)
std::pair<double, double> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("N range must look like lo:hi");
  double lo = 0.0, hi = 0.0;
  try {
    std::size_t a = 0, b = 0;
    lo = std::stod(s.substr(0, colon), &a);
    hi = std::stod(s.substr(colon + 1), &b);
    if (a != colon || b != s.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw UsageError("N range must look like lo:hi");
  }
  if (!(lo >= 1.0) || !(hi >= lo)) throw UsageError("N range needs 1 <= lo <= hi");
  return {lo, hi};
}

std::vector<double> log_points(double lo, double hi, int points) {
  std::vector<double> out;
  if (points < 2 || lo == hi) return {lo};
  for (int i = 0; i < points; ++i)
    out.push_back(std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * i / (points - 1)));
  return out;
}

std::vector<io::PredictionRow> overlay_rows(ProtocolKind k, Family meas, double lambda, double lo,
                                            double hi, double beta, double gamma) {
  // The static 1/N law describes highly mixed states only.
  if (k == ProtocolKind::Static && lambda < 0.5) return {};
  std::vector<io::PredictionRow> rows;
  for (double n : log_points(lo, hi, 60)) {
    const auto p = theory::predict(k, meas, lambda, n, beta, gamma);
    if (!p) return {};
    rows.push_back({n, *p});
  }
  return rows;
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) {
  fs::path p = base;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

// ---- run -------------------------------------------------------------------

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
  std::optional<int> repetitions;
  std::optional<std::string> format;
  std::vector<std::string> set;
};

int cmd_run(const RunArgs& a) {
  std::map<std::string, std::string> overrides;
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    overrides[detail::trim(kv.substr(0, eq))] = detail::trim(kv.substr(eq + 1));
  }
  if (a.seed) overrides["seed"] = std::to_string(*a.seed);
  if (a.out) overrides["output"] = *a.out;
  if (a.workers) overrides["workers"] = std::to_string(*a.workers);
  if (a.repetitions) overrides["repetitions"] = std::to_string(*a.repetitions);
  if (a.format) overrides["format"] = *a.format;
  const RunConfig cfg = load_config(a.config, overrides);

  const SweepResult result = run_sweep(cfg.sweep);
  {
    auto out = open_output(cfg.output);
    if (cfg.format == OutputFormat::Json)
      out << io::to_json(result).dump(2) << '\n';
    else
      io::write_sweep_csv(out, result);
  }
  if (cfg.overlay) {
    const auto& grid = cfg.sweep.n_grid;
    for (ProtocolKind k : cfg.sweep.protocols) {
      const auto rows = overlay_rows(k, cfg.sweep.measurement, cfg.lambda,
                                     static_cast<double>(grid.front()),
                                     static_cast<double>(grid.back()), cfg.beta, cfg.gamma);
      if (rows.empty()) continue;
      auto out = open_output(with_suffix(cfg.output, "." + std::string(to_string(k)) + ".theory.csv"));
      io::write_prediction_csv(out, rows);
    }
  }
  if (const int bad = result.flagged_rows(); bad > 0) {
    std::cerr << "qtomo: " << bad << " row(s) excluded more than 1% of trials for non-convergence\n";
    return kExitFlagged;
  }
  return kExitOk;
}

// ---- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string meas = "sic";
  double lambda = 0.0;
  std::string protocol = "known";
  std::string range = "1e2:1e6";
  int points = 13;
  double beta = theory::kDefaultBeta;
  double gamma = theory::kDefaultGamma;
  std::string out = "-";
};

int cmd_predict(const PredictArgs& a) {
  const Family meas = parse_family(a.meas);
  const ProtocolKind kind = parse_protocol(a.protocol);
  const auto [lo, hi] = parse_range(a.range);
  if (!(a.lambda >= 0.0 && a.lambda <= 0.5)) throw UsageError("lambda must lie in [0, 1/2]");
  if (a.points < 1) throw UsageError("points must be positive");
  std::vector<io::PredictionRow> rows;
  for (double n : log_points(lo, hi, a.points)) {
    const auto p = theory::predict(kind, meas, a.lambda, n, a.beta, a.gamma);
    if (!p) throw UsageError("no closed-form law for static tomography of a pure state");
    rows.push_back({n, *p});
  }
  if (a.out == "-") {
    io::write_prediction_csv(std::cout, rows);
  } else {
    auto out = open_output(a.out);
    io::write_prediction_csv(out, rows);
  }
  return kExitOk;
}

// ---- fit -------------------------------------------------------------------

int cmd_fit(const std::string& input, const std::string& output) {
  std::ifstream in(input);
  if (!in) throw UsageError("cannot read '" + input + "'");
  const auto results = io::read_sweep_csv(in);
  if (results.empty()) throw UsageError("no rows in '" + input + "'");
  const auto fits = io::fit_all(results);
  if (fits.empty()) throw UsageError("no curve has three positive points to fit");
  if (output == "-") {
    io::write_fit_csv(std::cout, fits);
  } else {
    auto out = open_output(output);
    io::write_fit_csv(out, fits);
  }
  return kExitOk;
}

// ---- reproduce -------------------------------------------------------------

struct ReproduceArgs {
  std::string tag;
  std::string scale = "desk";
  std::uint64_t seed = 2024;
  std::optional<int> repetitions;
  std::optional<int> workers;
  std::string outdir = ".";
  std::string adaptive = "second";
};

int cmd_reproduce(const ReproduceArgs& a) {
  bool known = false;
  for (const auto& t : figure_tags()) known = known || t == a.tag;
  if (!known) throw UsageError("unknown figure tag '" + a.tag + "'");
  ReproduceOptions opt;
  opt.scale = parse_scale(a.scale);
  opt.seed = a.seed;
  if (a.repetitions) {
    if (*a.repetitions < 1) throw UsageError("repetitions must be at least 1");
    opt.repetitions = *a.repetitions;
  }
  opt.workers = a.workers ? static_cast<unsigned>(std::max(1, *a.workers)) : default_workers();
  opt.adaptive_final = parse_adaptive_final(a.adaptive);

  const FigureRun run = reproduce(a.tag, opt);
  const fs::path dir = a.outdir;
  const std::string data_name = a.tag + ".csv";
  {
    auto out = open_output(dir / data_name);
    out << io::kSweepHeader << '\n';
    for (const auto& s : run.series) io::write_sweep_rows(out, s.result);
  }
  std::vector<io::FitRecord> fits;
  for (const auto& f : run.fits) fits.push_back({f.measurement, f.series, f.protocol, f.fit});
  {
    auto out = open_output(dir / (a.tag + ".fits.csv"));
    io::write_fit_csv(out, fits);
  }

  std::vector<io::PlotCurve> curves;
  int flagged = 0;
  for (const auto& s : run.series) {
    flagged += s.result.flagged_rows();
    const auto& grid = s.spec.n_grid;
    for (ProtocolKind k : s.spec.protocols) {
      const std::string proto(to_string(k));
      curves.push_back({s.label + " " + proto, data_name, s.label, proto, false});
      const auto rows = overlay_rows(k, s.spec.measurement, s.lambda, static_cast<double>(grid.front()),
                                     static_cast<double>(grid.back()), theory::kDefaultBeta,
                                     theory::kDefaultGamma);
      if (rows.empty()) continue;
      const std::string theory_name = a.tag + "." + s.label + "." + proto + ".theory.csv";
      auto out = open_output(dir / theory_name);
      io::write_prediction_csv(out, rows);
      curves.push_back({s.label + " " + proto + " (theory)", theory_name, "", proto, true});
    }
  }
  {
    auto out = open_output(dir / (a.tag + ".gp"));
    out << io::gnuplot_script(a.tag + " (" + a.scale + " scale)", a.tag + ".png", curves);
  }
  for (const auto& f : fits)
    std::cout << to_string(f.measurement) << ' ' << f.state_id << ' ' << to_string(f.protocol)
              << ": alpha = " << f.fit.alpha << " +/- " << f.fit.alpha_stderr << ", c = " << f.fit.c
              << '\n';
  if (flagged > 0) {
    std::cerr << "qtomo: " << flagged << " row(s) excluded more than 1% of trials for non-convergence\n";
    return kExitFlagged;
  }
  return kExitOk;
}

// ---- oracle ----------------------------------------------------------------

struct OracleArgs {
  std::string meas = "sic";
  std::string protocol = "static";
  std::vector<double> bloch{0.0, 0.0, 1.0};
  Shots n = 30;
};

int cmd_oracle(const OracleArgs& a) {
  if (a.bloch.size() != 3) throw UsageError("--bloch needs three components");
  const BlochVector s{a.bloch[0], a.bloch[1], a.bloch[2]};
  if (s.norm() > 1.0 + kPhysicalTol) throw UsageError("Bloch vector lies outside the ball");
  const ProtocolKind kind = parse_protocol(a.protocol);
  const Family meas = parse_family(a.meas);
  const double value =
      exact_expected_infidelity(QubitState{project_to_ball(s)}, canonical_model(meas), kind, a.n);
  nlohmann::json j{{"measurement", a.meas},
                   {"protocol", std::string(to_string(kind))},
                   {"bloch", io::to_json(s)},
                   {"N", a.n},
                   {"expected_infidelity", value}};
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo and exact analysis of adaptive qubit tomography"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a sweep described by a config file");
  run_cmd->add_option("--config,-c", run.config, "Config file")->required();
  run_cmd->add_option("--seed", run.seed, "Override the seed");
  run_cmd->add_option("--out,-o", run.out, "Override the output path");
  run_cmd->add_option("--workers,-j", run.workers, "Override the worker count");
  run_cmd->add_option("--reps", run.repetitions, "Override the repetition count");
  run_cmd->add_option("--format", run.format, "csv or json");
  run_cmd->add_option("--set", run.set, "Override any config key (key=value)");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Closed-form infidelity predictions");
  pred_cmd->add_option("--meas", pred.meas, "sic or mub");
  pred_cmd->add_option("--lambda", pred.lambda, "Smaller eigenvalue of the state");
  pred_cmd->add_option("--protocol", pred.protocol, "static, adaptive or known");
  pred_cmd->add_option("--n", pred.range, "N range lo:hi");
  pred_cmd->add_option("--points", pred.points, "Number of log-spaced N values");
  pred_cmd->add_option("--beta", pred.beta, "Adaptive SIC coefficient");
  pred_cmd->add_option("--gamma", pred.gamma, "Adaptive MUB coefficient");
  pred_cmd->add_option("--out,-o", pred.out, "Output path, - for stdout");

  std::string fit_in, fit_out = "-";
  auto* fit_cmd = app.add_subcommand("fit", "Power-law fits of a sweep CSV per curve");
  fit_cmd->add_option("input", fit_in, "Sweep CSV")->required();
  fit_cmd->add_option("--out,-o", fit_out, "Output path, - for stdout");

  ReproduceArgs rep;
  auto* rep_cmd = app.add_subcommand("reproduce", "Run the experiment behind a figure or table");
  rep_cmd->add_option("tag", rep.tag, "fig2a ... fig9b, table1")->required();
  rep_cmd->add_option("--scale", rep.scale, "desk or paper");
  rep_cmd->add_option("--seed", rep.seed, "Seed");
  rep_cmd->add_option("--reps", rep.repetitions, "Repetitions per point");
  rep_cmd->add_option("--workers,-j", rep.workers, "Worker threads");
  rep_cmd->add_option("--outdir", rep.outdir, "Directory for data, fits and plot script");
  rep_cmd->add_option("--adaptive-estimate", rep.adaptive, "second or pooled");

  OracleArgs orc;
  auto* orc_cmd = app.add_subcommand("oracle", "Exact expected infidelity by enumeration");
  orc_cmd->add_option("--meas", orc.meas, "sic or mub");
  orc_cmd->add_option("--protocol", orc.protocol, "static or known");
  orc_cmd->add_option("--bloch", orc.bloch, "Bloch vector x y z")->expected(3);
  orc_cmd->add_option("--n", orc.n, "Total shots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*pred_cmd) return cmd_predict(pred);
    if (*fit_cmd) return cmd_fit(fit_in, fit_out);
    if (*rep_cmd) return cmd_reproduce(rep);
    if (*orc_cmd) return cmd_oracle(orc);
  } catch (const std::invalid_argument& e) {
    std::cerr << "qtomo: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::domain_error& e) {
    std::cerr << "qtomo: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::out_of_range& e) {
    std::cerr << "qtomo: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "qtomo: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
