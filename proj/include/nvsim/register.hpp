#pragma once

#include <string>
#include <vector>

#include "nvsim/config.hpp"

namespace nvsim {

// Electronic level of the defect. Ex is optically reachable from ms = 0
// only, A1 from ms = +/-1 only; the singlet is the metastable shelf fed by
// intersystem crossing.
enum class ElectronLevel : int {
  Ground0 = 0,
  GroundMinus = 1,
  GroundPlus = 2,
  ExcitedEx = 3,
  ExcitedA1 = 4,
  Singlet = 5,
};

constexpr int kElectronLevels = 6;

inline bool is_ground(ElectronLevel e) {
  return e == ElectronLevel::Ground0 || e == ElectronLevel::GroundMinus ||
         e == ElectronLevel::GroundPlus;
}

// ms value for ground levels: 0, -1, +1.
inline int ms_of(ElectronLevel e) {
  switch (e) {
    case ElectronLevel::Ground0: return 0;
    case ElectronLevel::GroundMinus: return -1;
    case ElectronLevel::GroundPlus: return +1;
    default: return 0;
  }
}

std::string to_string(ElectronLevel e);

// Projections of the nuclear register: the host 14N (spin 1, mI in
// {-1,0,+1}) and up to two 13C (spin 1/2, stored as twice the projection,
// i.e. +/-1). Inactive nuclei are frozen at the sentinel value 0 and are
// excluded from enumeration. Enumeration order (most-significant first):
// mI14 in {-1,0,+1}, then mC1 in {-1/2,+1/2}, then mC2 in {-1/2,+1/2}.
struct NuclearConfig {
  int mi14 = 0;       // {-1, 0, +1}
  int mc1_half = 0;   // twice mC1: {-1, +1}, 0 = inactive
  int mc2_half = 0;   // twice mC2: {-1, +1}, 0 = inactive

  bool operator==(const NuclearConfig&) const = default;

  static std::vector<NuclearConfig> enumerate(int n_active);
  static int count(int n_active);
  static int index_of(const NuclearConfig& c, int n_active);
  static NuclearConfig from_index(int index, int n_active);

  std::string to_string() const;
};

// Full register state: electron level, nuclear configuration, and the
// charge/resonance flag. When charge_ok is false the defect is dark to the
// resonant lasers (no optical transition may fire).
struct RegisterState {
  ElectronLevel electron = ElectronLevel::Ground0;
  NuclearConfig nuclei;
  bool charge_ok = true;

  bool operator==(const RegisterState&) const = default;
};

// One hyperfine-resolved ESR line.
struct HyperfineLine {
  double frequency_mhz = 0.0;
  int branch = -1;  // addressed ground transition: ms = 0 <-> branch
  NuclearConfig config;
};

// Hyperfine level bookkeeping: line frequencies for the ms=0 <-> ms=+/-1
// transitions of every nuclear configuration.
//
// Sign convention: line = f0 + branch * (zeeman/2 - A14*mI + AC1*mC1 + AC2*mC2),
// so the lowest-frequency line on the ms=-1 branch is the one with
// mI = -1 and both carbons at +1/2.
struct HyperfineModel {
  double f0_mhz = 2877.2;        // centre of the enumerated line pattern
  double zeeman_mhz = 2.0;       // splitting between ms=-1 and ms=+1 branches
  double a14_mhz = 2.2;          // 14N hyperfine splitting
  double ac1_mhz = 0.4;          // first 13C splitting
  double ac2_mhz = 0.13;         // second 13C splitting
  double rf_nuclear_mhz = 4.9464;  // nuclear transition in the addressed manifold
  double linewidth_mhz = 0.05;   // Gaussian ESR line sigma
  int rf_manifold_ms = 0;        // electron manifold in which rf_nuclear is resonant
  int n_active_nuclei = 1;       // 1: 14N, 2: +13C#1, 3: +13C#2

  void validate() const;

  // Signed hyperfine offset of a configuration (added to the branch term).
  double offset_mhz(const NuclearConfig& c) const;
  double line_frequency_mhz(const NuclearConfig& c, int branch) const;

  static HyperfineModel from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

// All 2 x (#configs) lines, sorted ascending by frequency.
std::vector<HyperfineLine> enumerate_hyperfine_lines(const HyperfineModel& model,
                                                     int n_active_nuclei);

double line_for_config(const HyperfineModel& model, const NuclearConfig& config, int branch);

// Inverse lookup. Succeeds when the line is non-degenerate (no other line
// within linewidth/10); otherwise throws AmbiguityError listing the matches.
HyperfineLine config_for_frequency(const HyperfineModel& model, double frequency_mhz,
                                   int n_active_nuclei);

// Ordered ground-manifold state space (electron ms x nuclear configs),
// used to index exact-oracle matrices. Electron order: ms=0, -1, +1.
std::vector<RegisterState> state_space(int n_active_nuclei);
int state_index(const RegisterState& s, int n_active_nuclei);

}  // namespace nvsim
