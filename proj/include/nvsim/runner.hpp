#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nvsim/program.hpp"
#include "nvsim/protocols.hpp"

namespace nvsim {

struct ShotRow {
  long shot = 0;
  bool accepted = true;
  std::string reject_reason;
  // One entry per read slot; empty when the shot aborted before the READ.
  std::vector<std::optional<int>> counts;
};

struct ShotTable {
  std::vector<std::string> slots;       // from ProtocolProgram::read_slots
  std::vector<int> slot_thresholds;     // threshold of the defining READ
  std::vector<ShotRow> rows;

  // RFC-4180 CSV; one row per shot, ordered by shot index.
  std::string to_csv() const;
  // Estimates + 2-SE intervals per slot.
  std::string to_json_summary() const;
};

struct RunOptions {
  long n_shots = 1000;
  std::uint64_t master_seed = 1;
  int n_threads = 1;
  bool strict = false;  // reject MW carriers > 5 linewidths from any line
};

// Executes every shot independently. A failed CONDITION or CHECK_CHARGE
// marks the shot rejected-with-reason and stops it; its remaining READ
// slots stay empty. Output is identical for identical (program, models,
// seed) at any thread count.
ShotTable run_program(const ProtocolProgram& program, const SimModel& model,
                      const ExperimentConfig& exp, const RunOptions& options);

std::string csv_quote(const std::string& field);

}  // namespace nvsim
