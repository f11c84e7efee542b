#pragma once

// CSV and JSON emission for sweeps, fits, predictions and single estimates,
// plus the gnuplot script written next to reproduced figures.

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qtomo/harness.hpp"
#include "qtomo/theory.hpp"

namespace qtomo::io {

using nlohmann::json;

inline constexpr std::string_view kSweepHeader =
    "protocol,measurement,state_id,N,mean_infidelity,std_error,repetitions,excluded";
inline constexpr std::string_view kFitHeader =
    "measurement,state_id,protocol,alpha,alpha_stderr,c,r_squared";
inline constexpr std::string_view kPredictionHeader = "N,predicted_infidelity,regime";

/// Shortest decimal that reads back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

// ---- JSON ------------------------------------------------------------------

inline json to_json(BlochVector v) { return json::array({v.x, v.y, v.z}); }

inline BlochVector bloch_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json to_json(const QubitState& s) {
  const DensityMatrix rho = s.density();
  json m = json::array();
  for (int r = 0; r < 2; ++r) {
    json row = json::array();
    for (int c = 0; c < 2; ++c) row.push_back(json::array({rho(r, c).real(), rho(r, c).imag()}));
    m.push_back(row);
  }
  return {{"bloch", to_json(s.bloch())}, {"density", m}};
}

inline QubitState state_from_json(const json& j) { return QubitState{bloch_from_json(j.at("bloch"))}; }

inline json to_json(const MeasurementModel& m) {
  json dirs = json::array();
  std::visit(
      [&dirs](const auto& model) {
        if constexpr (std::is_same_v<std::decay_t<decltype(model)>, SicModel>)
          for (const auto& d : model.directions) dirs.push_back(to_json(d));
        else
          for (const auto& a : model.axes) dirs.push_back(to_json(a));
      },
      m);
  return {{std::string(to_string(family_of(m))), dirs}};
}

inline json to_json(const CountRecord& c) {
  return {{"settings", c.settings}, {"shots", c.shots}};
}

inline CountRecord record_from_json(const json& j) {
  CountRecord c;
  c.settings = j.at("settings").get<std::vector<std::vector<Shots>>>();
  c.shots = j.at("shots").get<std::vector<Shots>>();
  if (!c.valid()) throw std::invalid_argument("inconsistent count record");
  return c;
}

inline json to_json(const Estimate& e) {
  return {{"raw", to_json(e.raw)},
          {"mle", to_json(e.mle)},
          {"log_likelihood", e.log_likelihood},
          {"method", std::string(to_string(e.method))},
          {"iterations", e.iterations},
          {"converged", e.converged}};
}

inline json to_json(const SweepResult& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"protocol", std::string(to_string(row.protocol))},
                    {"N", row.n},
                    {"mean_infidelity", row.mean_infidelity},
                    {"std_error", row.std_error},
                    {"repetitions", row.repetitions},
                    {"excluded", row.excluded}});
  return {{"measurement", std::string(to_string(r.measurement))},
          {"state_id", r.state_id},
          {"rows", rows}};
}

// ---- sweep CSV -------------------------------------------------------------

inline void write_sweep_rows(std::ostream& os, const SweepResult& r) {
  if (r.state_id.find_first_of(",\n") != std::string::npos)
    throw std::invalid_argument("state_id may not contain commas or newlines");
  for (const auto& row : r.rows)
    os << to_string(row.protocol) << ',' << to_string(r.measurement) << ',' << r.state_id << ','
       << row.n << ',' << fmt(row.mean_infidelity) << ',' << fmt(row.std_error) << ','
       << row.repetitions << ',' << row.excluded << '\n';
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& r) {
  os << kSweepHeader << '\n';
  write_sweep_rows(os, r);
}

/// Parses a sweep CSV back into one SweepResult per (measurement, state_id),
/// in order of first appearance.
inline std::vector<SweepResult> read_sweep_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty sweep CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSweepHeader) throw std::invalid_argument("unexpected sweep CSV header: " + line);
  std::vector<SweepResult> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8)
      throw std::invalid_argument("sweep CSV line " + std::to_string(lineno) + ": expected 8 fields");
    try {
      SweepRow row;
      row.protocol = parse_protocol(f[0]);
      const Family meas = parse_family(f[1]);
      std::size_t used = 0;
      row.n = std::stoll(f[3], &used);
      if (used != f[3].size()) throw std::invalid_argument("N");
      row.mean_infidelity = std::stod(f[4]);
      row.std_error = std::stod(f[5]);
      row.repetitions = std::stoi(f[6]);
      row.excluded = std::stoi(f[7]);
      SweepResult* target = nullptr;
      for (auto& r : out)
        if (r.measurement == meas && r.state_id == f[2]) target = &r;
      if (!target) {
        out.push_back({meas, f[2], {}});
        target = &out.back();
      }
      target->rows.push_back(row);
    } catch (const std::exception& e) {
      throw std::invalid_argument("sweep CSV line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---- fit CSV ---------------------------------------------------------------

struct FitRecord {
  Family measurement = Family::Sic;
  std::string state_id;
  ProtocolKind protocol = ProtocolKind::Static;
  PowerLawFit fit;
};

/// One fit per protocol curve over its positive points, when there are at least three.
inline std::vector<FitRecord> fit_all(const std::vector<SweepResult>& results) {
  std::vector<FitRecord> out;
  for (const auto& r : results)
    for (ProtocolKind k : {ProtocolKind::Static, ProtocolKind::Adaptive, ProtocolKind::KnownBasis}) {
      std::vector<SweepRow> rows;
      for (const auto& row : r.protocol_rows(k))
        if (row.mean_infidelity > 0.0) rows.push_back(row);
      if (rows.size() >= 3) out.push_back({r.measurement, r.state_id, k, fit_power_law(rows)});
    }
  return out;
}

inline void write_fit_csv(std::ostream& os, const std::vector<FitRecord>& fits) {
  os << kFitHeader << '\n';
  for (const auto& f : fits)
    os << to_string(f.measurement) << ',' << f.state_id << ',' << to_string(f.protocol) << ','
       << fmt(f.fit.alpha) << ',' << fmt(f.fit.alpha_stderr) << ',' << fmt(f.fit.c) << ','
       << fmt(f.fit.r_squared) << '\n';
}

inline std::vector<FitRecord> read_fit_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty fit CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kFitHeader) throw std::invalid_argument("unexpected fit CSV header: " + line);
  std::vector<FitRecord> out;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw std::invalid_argument("fit CSV: expected 7 fields");
    FitRecord r;
    r.measurement = parse_family(f[0]);
    r.state_id = f[1];
    r.protocol = parse_protocol(f[2]);
    r.fit = {std::stod(f[3]), std::stod(f[5]), std::stod(f[4]), std::stod(f[6])};
    out.push_back(r);
  }
  return out;
}

// ---- predictions -----------------------------------------------------------

struct PredictionRow {
  double n = 0.0;
  theory::Prediction prediction;
};

inline void write_prediction_csv(std::ostream& os, const std::vector<PredictionRow>& rows) {
  os << kPredictionHeader << '\n';
  for (const auto& r : rows) {
    const auto regime = r.prediction.near_turning(r.n) ? std::string_view("near-turning")
                                                       : theory::to_string(r.prediction.regime);
    os << fmt(r.n) << ',' << fmt(r.prediction.infidelity) << ',' << regime << '\n';
  }
}

inline std::vector<PredictionRow> read_prediction_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty prediction CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPredictionHeader) throw std::invalid_argument("unexpected prediction CSV header");
  std::vector<PredictionRow> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 3) throw std::invalid_argument("prediction CSV: expected 3 fields");
    PredictionRow r;
    r.n = std::stod(f[0]);
    r.prediction.infidelity = std::stod(f[1]);
    if (f[2] == "below-turning") r.prediction.regime = theory::Regime::BelowTurning;
    else if (f[2] == "above-turning") r.prediction.regime = theory::Regime::AboveTurning;
    else if (f[2] == "asymptotic" || f[2] == "near-turning") r.prediction.regime = theory::Regime::Asymptotic;
    else throw std::invalid_argument("prediction CSV: unknown regime '" + f[2] + "'");
    out.push_back(r);
  }
  return out;
}

// ---- plot script -----------------------------------------------------------

struct PlotCurve {
  std::string title;
  std::string file;
  std::string state_id;
  std::string protocol;
  bool theory = false;
};

/// gnuplot script drawing each curve from the given CSV files on log-log axes.
/// Data curves filter the sweep CSV by state_id and protocol; theory curves
/// read a prediction CSV directly.
inline std::string gnuplot_script(std::string_view title, std::string_view image,
                                  const std::vector<PlotCurve>& curves) {
  std::ostringstream os;
  os << "set datafile separator ','\n"
     << "set terminal pngcairo size 800,600\n"
     << "set output '" << image << "'\n"
     << "set title '" << title << "'\n"
     << "set logscale xy\n"
     << "set format y '10^{%L}'\n"
     << "set xlabel 'N'\n"
     << "set ylabel '1 - F'\n"
     << "set key bottom left\n";
  os << "plot ";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    if (i) os << ", \\\n     ";
    if (c.theory) {
      os << "'" << c.file << "' every ::1 using 1:2 with lines dt 2 title '" << c.title << "'";
    } else {
      os << "'" << c.file << "' every ::1 using ((strcol(3) eq '" << c.state_id
         << "' && strcol(1) eq '" << c.protocol << "') ? $4 : 1/0):5:6 with yerrorbars title '"
         << c.title << "'";
    }
  }
  os << "\n";
  return os.str();
}

}  // namespace qtomo::io
