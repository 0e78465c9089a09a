#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nvsim/pulses.hpp"
#include "nvsim/rates.hpp"
#include "nvsim/register.hpp"
#include "nvsim/rng.hpp"
#include "nvsim/trajectory.hpp"

namespace nvsim {

// Immutable model bundle shared by all shots.
struct SimModel {
  RateModel rates;
  HyperfineModel hf;
};

// Electron readout settings: Ex illumination, photon-count threshold.
struct ReadoutConfig {
  double duration_us = 100.0;
  int threshold = 1;  // counts >= threshold declares ms=0
  double power_nw = 0.7;

  void validate() const;
};

enum class SpinClass { Ms0, MsPm1 };

inline SpinClass declare(int counts, int threshold) {
  return counts >= threshold ? SpinClass::Ms0 : SpinClass::MsPm1;
}

struct ShotOutcome {
  int counts = 0;
  SpinClass declared = SpinClass::MsPm1;
  RegisterState post_state;
  bool accepted = true;
};

// Experiment-level defaults (pulse powers, windows, repetition counts);
// lives in the same flat config file as the models under exp.* keys.
struct ExperimentConfig {
  ReadoutConfig readout;

  double pump_ms0_us = 10.0;
  double pump_ms0_power_nw = 7.4;   // A1 laser
  double pump_pm1_us = 100.0;
  double pump_pm1_power_nw = 4.8;   // Ex laser

  double herald_window_us = 0.4;
  double herald_power_nw = 4.8;
  double omega_selective_mhz = 0.35;
  int herald_branch = -1;
  int prep_repetitions = 2;
  int prep_max_attempts = 400;

  double nuclear_read_us = 10.0;
  int nuclear_reps = 3;
  int nuclear_threshold = 1;
  bool nuclear_dark_on_target = true;

  double omega_probe_mhz = 0.2;
  double probe_read_us = 25.0;

  double omega_mw_mhz = 0.35;
  double omega_rf_mhz = 0.02;
  double electron_read_us = 15.0;
  int twoq_nuclear_reps = 5;

  static ExperimentConfig from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

NuclearConfig random_nuclear_config(int n_active, Rng& rng);

// ---- Optical pumping -------------------------------------------------

enum class PumpTarget { Ms0, MsPm1 };

struct PumpResult {
  RegisterState state;
  int counts = 0;
  bool underpumped_warning = false;  // duration < 3 pump-out times
};

PumpResult pump(const RegisterState& state, PumpTarget target, double duration_us,
                double power_nw, const SimModel& model, Rng& rng);

// Pooled quasi-steady pump-out time for the given drive (used for the
// under-pumping warning and as a fit seed).
double pooled_pump_out_time(const RateModel& rates, const DriveSpec& drive);

// ---- Electron readout ------------------------------------------------

ShotOutcome single_shot_readout(const RegisterState& state, const ReadoutConfig& cfg,
                                const SimModel& model, Rng& rng);

// Splits one continuous readout into [0, division) and [division, total),
// each thresholded independently.
std::pair<ShotOutcome, ShotOutcome> two_segment_readout(const RegisterState& state,
                                                        double division_us, double total_us,
                                                        const ReadoutConfig& cfg,
                                                        const SimModel& model, Rng& rng);

// Per-shot detected timestamps for window/division optimisation:
// bright-prepared and dark-prepared ensembles read for max_duration.
struct ReadoutRecords {
  std::vector<std::vector<double>> bright;
  std::vector<std::vector<double>> dark;
  double duration_us = 0.0;
};

ReadoutRecords readout_records(long n_shots_each, double max_duration_us, const SimModel& model,
                               const ExperimentConfig& exp, std::uint64_t master_seed);

// ---- Conditioned Rabi (projectiveness) --------------------------------

struct ConditionedRabiPoint {
  double mw_duration_us = 0.0;
  long n = 0;          // accepted shots
  long n_herald = 0;   // shots with >= 1 photon in the first window
  double p_uncond = 0.0, se_uncond = 0.0;
  double p_cond = 0.0, se_cond = 0.0;
};

struct ConditionedRabiConfig {
  std::vector<double> mw_durations_us;
  double mw_carrier_mhz = 0.0;  // 0: centre line of the -1 branch
  double mw_rabi_mhz = 3.9;
  double r1_window_us = 0.4;
  long n_shots = 2000;
};

std::vector<ConditionedRabiPoint> conditioned_rabi(const ConditionedRabiConfig& cfg,
                                                   const SimModel& model,
                                                   const ExperimentConfig& exp,
                                                   std::uint64_t master_seed);

// ---- Quantum jump traces ----------------------------------------------

struct JumpTraceConfig {
  double mw_rabi_mhz = 0.0;
  double mw_delta_minus_mhz = 0.0;  // carrier detuning from each branch line
  double mw_delta_plus_mhz = 0.0;
  double bin_us = 5.0;
  double total_us = 2000.0;
  double power_nw = 4.8;
  int bin_threshold = 1;  // counts >= threshold: bin is bright
};

struct QuantumJumpTrace {
  std::vector<int> bin_counts;
  std::vector<bool> inferred_bright;
  std::vector<double> bright_dwells_us;  // censored first/last excluded
  std::vector<double> dark_dwells_us;
};

// Incoherent flip rate of a continuously driven line under optical
// cycling at measurement rate gamma_m (1/us).
double mw_flip_rate(double omega_mhz, double delta_mhz, double gamma_m);

QuantumJumpTrace quantum_jump_trace(const JumpTraceConfig& cfg, const SimModel& model, Rng& rng);

// Run segmentation of a thresholded trace; censored first/last runs are
// dropped. Returns run lengths in bins.
std::pair<std::vector<int>, std::vector<int>> segment_dwells(const std::vector<bool>& bright);

// ---- Nuclear preparation and readout ----------------------------------

struct PrepareResult {
  RegisterState state;
  bool heralded = false;
  int attempts = 0;
};

// Measurement-based preparation: per repetition, pump the electron to
// ms=+/-1 (or ms=0 when select_complement), apply the hyperfine-selective
// pi on the target line, read the herald window; heralded iff all p
// repetitions give >= 1 photon.
PrepareResult prepare_nuclear(const RegisterState& state, const NuclearConfig& target, int p,
                              const SimModel& model, const ExperimentConfig& exp, Rng& rng,
                              bool select_complement = false);

struct NuclearReadoutResult {
  bool in_target = false;
  int total_counts = 0;
  RegisterState state;
};

// k repetitions of {pump, selective pi, short Ex readout, undo pi}; counts
// summed and thresholded. Polarity dark-on-target maps the target to the
// non-fluorescing electron state, so the target never sees optical
// excitation; bright-on-target inverts the mapping.
NuclearReadoutResult repetitive_nuclear_readout(const RegisterState& state,
                                                const NuclearConfig& target, int k, int threshold,
                                                bool dark_on_target, const SimModel& model,
                                                const ExperimentConfig& exp, Rng& rng);

// ---- Two-qubit experiment ----------------------------------------------

struct TwoQubitPixel {
  double rf_us = 0.0, mw_us = 0.0;
  long n = 0;             // accepted shots
  long n_rejected = 0;    // preparation failures
  long n_e0 = 0;          // electron declared ms=0
  long n_nuc = 0;         // nuclear declared in target
  long n_e0_nuc = 0;      // both
};

std::vector<TwoQubitPixel> two_qubit_experiment(const std::vector<double>& rf_grid_us,
                                                const std::vector<double>& mw_grid_us,
                                                long n_shots, const SimModel& model,
                                                const ExperimentConfig& exp,
                                                std::uint64_t master_seed);

// ---- Charge / resonance verification -----------------------------------

bool charge_resonance_check(const RegisterState& state, double p_reject, Rng& rng);

}  // namespace nvsim
