#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nvsim/protocols.hpp"

namespace nvsim {

// Line-oriented pulse-sequence language, one statement per line:
//
//   # Fig. 3a-style heralded preparation
//   NAME prep-demo
//   PUMP ms1 100us
//   MW 2874MHz 0.35MHz 1.4286us
//   READ 400ns >=1 herald 4.8nW
//   CONDITION herald counts>=1
//   REPEAT 3
//     PUMP ms0 10us
//     READ 10us >=1 r
//   END
//
// Keywords are case-insensitive; durations take ns/us/ms suffixes,
// frequencies kHz/MHz/GHz, powers nW. CONDITION must reference an earlier
// READ label; REPEAT blocks close with END and nest at most 8 deep.

struct PumpStmt {
  PumpTarget target = PumpTarget::Ms0;
  double duration_us = 0.0;
  std::optional<double> power_nw;
};

struct MwStmt {
  double carrier_mhz = 0.0;
  double rabi_mhz = 0.0;
  double duration_us = 0.0;
};

struct RfStmt {
  double carrier_mhz = 0.0;
  double rabi_mhz = 0.0;
  double duration_us = 0.0;
  int nucleus = 0;
};

struct ReadStmt {
  double duration_us = 0.0;
  int threshold = 1;
  std::string label;
  std::optional<double> power_nw;
};

struct ConditionStmt {
  std::string label;
  bool at_least = true;  // counts>=k, else counts<k
  int k = 1;
};

struct CheckChargeStmt {
  double p_reject = 0.0;
};

struct Statement;

struct RepeatStmt {
  long n = 1;
  std::vector<Statement> body;
};

struct Statement {
  std::variant<PumpStmt, MwStmt, RfStmt, ReadStmt, ConditionStmt, CheckChargeStmt, RepeatStmt> node;
  int line = 0;
};

struct ProtocolProgram {
  std::string name;
  std::optional<std::uint64_t> seed;
  std::optional<long> n_shots;
  std::vector<Statement> statements;

  // Static unroll of every READ execution, in order; slot names are the
  // label, suffixed with #k when the statement executes more than once.
  std::vector<std::string> read_slots;
};

// Parses and fully validates; throws ParseError with line/column on any
// unknown keyword, malformed unit, undefined label, or unclosed block.
ProtocolProgram parse_program(const std::string& source);

// Canonical text form; parse(pretty_print(p)) is a fixed point.
std::string pretty_print(const ProtocolProgram& program);

}  // namespace nvsim
