#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nash_arena/policy.hpp"

namespace nash_arena {

// One record per completed update; `step` is the 0-based record position
// (record t holds the state after t+1 updates). Diagnostic fields are absent
// when diagnostics were off or unavailable for the game.
struct TraceRecord {
  long step = 0;
  double gap_last = 0.0;
  double gap_avg = 0.0;
  std::optional<double> kl_to_star;
  std::optional<double> theta_pot;
  std::optional<double> phi_pot;
  double k_hat = 0.0;
  std::int64_t wall_ns = 0;
};

struct Trace {
  std::vector<TraceRecord> records;
  std::optional<Policy> pi_star;       // projection target when diagnostics ran
  bool diagnostics_degraded = false;   // requested but no full-support NE
};

inline nlohmann::json trace_record_to_json(const TraceRecord& r,
                                           bool wall_time = true) {
  nlohmann::json j;
  j["step"] = r.step;
  j["gap_last"] = r.gap_last;
  j["gap_avg"] = r.gap_avg;
  j["kl_to_star"] = r.kl_to_star ? nlohmann::json(*r.kl_to_star) : nlohmann::json(nullptr);
  j["theta_pot"] = r.theta_pot ? nlohmann::json(*r.theta_pot) : nlohmann::json(nullptr);
  j["phi_pot"] = r.phi_pot ? nlohmann::json(*r.phi_pot) : nlohmann::json(nullptr);
  j["k_hat"] = r.k_hat;
  j["wall_ns"] = wall_time ? r.wall_ns : 0;
  return j;
}

inline void write_trace_jsonl(const Trace& trace,
                              const std::filesystem::path& path,
                              bool wall_time = true) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_trace_jsonl: cannot open " + path.string());
  for (const auto& r : trace.records)
    out << trace_record_to_json(r, wall_time).dump() << "\n";
}

inline Trace read_trace_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("read_trace_jsonl: cannot open " + path.string());
  Trace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    TraceRecord r;
    r.step = j.at("step").get<long>();
    r.gap_last = j.at("gap_last").get<double>();
    r.gap_avg = j.at("gap_avg").get<double>();
    if (!j.at("kl_to_star").is_null()) r.kl_to_star = j.at("kl_to_star").get<double>();
    if (!j.at("theta_pot").is_null()) r.theta_pot = j.at("theta_pot").get<double>();
    if (!j.at("phi_pot").is_null()) r.phi_pot = j.at("phi_pot").get<double>();
    r.k_hat = j.at("k_hat").get<double>();
    r.wall_ns = j.at("wall_ns").get<std::int64_t>();
    trace.records.push_back(r);
  }
  return trace;
}

}  // namespace nash_arena
