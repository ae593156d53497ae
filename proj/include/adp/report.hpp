#pragma once

#include <json.hpp>

#include "adp/solve.hpp"

namespace adp {

// Trace CSV: one row per outer iteration. Timings are nondeterministic, so
// the wall_ms column is written as 0 unless explicitly requested; real
// timings live in the run summary. This keeps identical runs byte-identical.
inline void write_trace_csv(const RunTrace& trace, const std::string& path,
                            bool include_timings = false) {
  std::ofstream os(path);
  if (!os) throw io_error("write_trace_csv: cannot open '" + path + "'");
  os << "i,supnorm_delta,bellman_residual,mono_margin,eval_sweeps,excursions,wall_ms\n";
  for (const IterationRecord& r : trace.rows) {
    os << r.iteration << "," << format_full(r.supnorm_delta) << ","
       << format_full(r.bellman_residual) << "," << format_full(r.mono_margin) << ","
       << r.eval_sweeps << "," << r.excursions << ","
       << (include_timings ? format_full(r.wall_ms) : "0") << "\n";
  }
  if (!os) throw io_error("write_trace_csv: write failure on '" + path + "'");
}

inline RunTrace read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("read_trace_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw io_error("read_trace_csv: empty file '" + path + "'");
  RunTrace trace;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cols = detail::split(line, ",");
    if (cols.size() != 7)
      throw io_error("read_trace_csv: malformed row '" + line + "' in '" + path + "'");
    IterationRecord r;
    r.iteration = std::stoi(cols[0]);
    r.supnorm_delta = std::stod(cols[1]);
    r.bellman_residual = std::stod(cols[2]);
    r.mono_margin = std::stod(cols[3]);
    r.eval_sweeps = std::stoi(cols[4]);
    r.excursions = std::stoll(cols[5]);
    r.wall_ms = std::stod(cols[6]);
    trace.rows.push_back(r);
  }
  return trace;
}

inline nlohmann::json certificate_to_json(const Certificate& cert) {
  nlohmann::json j;
  j["subject"] = cert.subject;
  j["passed"] = cert.passed;
  j["inconclusive"] = cert.inconclusive;
  j["vacuous"] = cert.vacuous;
  j["worst"] = {{"node", cert.worst.node},
                {"x", cert.worst.x},
                {"iteration", cert.worst.iteration},
                {"margin", cert.worst.margin}};
  j["details"] = nlohmann::json::array();
  for (const auto& row : cert.details)
    j["details"].push_back({{"check", row.check},
                            {"passed", row.passed},
                            {"margin", row.margin},
                            {"threshold", row.threshold},
                            {"note", row.note}});
  return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw io_error("write_json: cannot open '" + path + "'");
  os << j.dump(2) << "\n";
  if (!os) throw io_error("write_json: write failure on '" + path + "'");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("read_json: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw io_error("read_json: '" + path + "': " + e.what());
  }
  return j;
}

}  // namespace adp
