#pragma once

#include <map>
#include <optional>
#include <string>

#include "nvsim/register.hpp"
#include "nvsim/rng.hpp"

namespace nvsim {

// Microwave / radio-frequency pulse. Frequencies in MHz, duration in us
// (MHz * us is dimensionless, so phases need no extra factors).
struct PulseParams {
  double carrier_mhz = 0.0;
  double rabi_mhz = 0.0;   // bare Rabi frequency Omega
  double duration_us = 0.0;

  void validate() const;
};

// Detuned-Rabi population transfer of a two-level transition:
//   p = Omega^2/(Omega^2+delta^2) * sin^2(pi * sqrt(Omega^2+delta^2) * t).
double rabi_flip_probability(double omega_mhz, double delta_mhz, double duration_us);

// Flip probabilities the gates would apply to a given state; exposed so
// tests can assert against closed forms without sampling.
double mw_flip_probability(const RegisterState& state, const PulseParams& pulse,
                           const HyperfineModel& model);
double rf_flip_probability(const RegisterState& state, const PulseParams& pulse,
                           const HyperfineModel& model, int nucleus_index);

// Population-only MW action: flips between ms=0 and the addressed branch
// (the branch whose hyperfine line for the current nuclear configuration
// is nearest the carrier). Electron must be in a ground state.
RegisterState mw_pulse(const RegisterState& state, const PulseParams& pulse,
                       const HyperfineModel& model, Rng& rng);

// Nuclear rotation on the addressed nucleus (0 = 14N driving mI -1 <-> 0,
// 1/2 = the carbons, sign swap), resonant only in the configured electron
// manifold; other manifolds are detuned by the hyperfine splitting.
RegisterState rf_pulse(const RegisterState& state, const PulseParams& pulse,
                       const HyperfineModel& model, int nucleus_index, Rng& rng);

// Hyperfine-selective pi pulse: mw_pulse at the target line with duration
// 1/(2*Omega). Flips the electron with p ~ 1 when the register is in
// target_config and with the detuned-Rabi leakage otherwise.
struct SelectivePiResult {
  RegisterState state;
  // Leakage probability per nuclear configuration index (target has ~1).
  std::map<int, double> flip_probability;
  std::optional<std::string> selectivity_warning;
  double worst_leakage = 0.0;  // largest non-target flip probability
};

SelectivePiResult selective_pi(const RegisterState& state, const NuclearConfig& target_config,
                               int branch, const HyperfineModel& model, double omega_mhz,
                               Rng& rng);

}  // namespace nvsim
