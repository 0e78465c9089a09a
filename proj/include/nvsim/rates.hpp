#pragma once

#include <map>
#include <optional>
#include <string>

#include "nvsim/config.hpp"

namespace nvsim {

// Which resonant lasers are on, and at what power. Excitation rates follow
// the saturation law rate = r_max * s/(1+s) with s = P/P_sat.
struct DriveSpec {
  bool ex = false;
  bool a1 = false;
  double power_ex_nw = 0.0;
  double power_a1_nw = 0.0;

  static DriveSpec none() { return {}; }
  static DriveSpec ex_only(double p_nw) { return {true, false, p_nw, 0.0}; }
  static DriveSpec a1_only(double p_nw) { return {false, true, 0.0, p_nw}; }
  static DriveSpec both(double p_ex, double p_a1) { return {true, true, p_ex, p_a1}; }
};

// All stochastic transition rates of the optical model. Rates in 1/us,
// probabilities dimensionless. gamma_exc_* are the saturation asymptotes;
// use excitation_ex/a1(power) for the at-power values.
struct RateModel {
  double gamma_exc_ex_max = 40.0;  // Ex excitation, P -> inf asymptote
  double gamma_exc_a1_max = 8.0;   // A1 excitation, P -> inf asymptote
  double p_sat_nw = 6.0;           // saturation power

  double gamma_rad = 83.3;         // radiative decay of either excited state
  double gamma_isc_ex = 0.0;       // Ex -> singlet intersystem crossing
  double gamma_isc_a1 = 110.0;     // A1 -> singlet intersystem crossing
  double gamma_singlet = 4.0;      // singlet decay
  double beta0 = 1.0;              // singlet branching fraction into ms=0

  double p_mix_ex = 8.3e-3;        // per-optical-cycle spin flip, Ex cycle
  double p_mix_a1 = 0.0;           // per-optical-cycle spin flip, A1 cycle
  double gamma_leak_dark = 1.7e-4; // ms=+/-1 -> fluorescing pool under Ex light

  double q_nuc = 0.0;              // per-optical-cycle nuclear spin flip probability
  double eta = 0.05;               // collection x detection efficiency
  double dark_rate = 0.0;          // detector dark counts, 1/us

  double excitation_ex(double power_nw) const { return saturated(gamma_exc_ex_max, power_nw); }
  double excitation_a1(double power_nw) const { return saturated(gamma_exc_a1_max, power_nw); }

  void validate() const;

  static RateModel from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;

 private:
  double saturated(double r_max, double power_nw) const {
    if (power_nw <= 0.0) return 0.0;
    const double s = power_nw / p_sat_nw;
    return r_max * s / (1.0 + s);
  }
};

// Observables the rate model is calibrated against. Rates in kcounts/s,
// times in us. Unset fields are simply not fitted. The preparation-error
// fields are upper bounds (the source values are lower limits on fidelity):
// the calibrated model must not exceed them.
struct CalibrationTargets {
  std::optional<double> r0_ms0_kcps;     // initial detected rate, Ex from ms=0
  std::optional<double> tau_flip_ex_us;  // fluorescence decay time under Ex
  std::optional<double> r0_pm1_kcps;     // initial detected rate, A1 from ms=+/-1
  std::optional<double> tau_flip_a1_us;  // fluorescence decay time under A1
  std::optional<double> p_zero_dark;     // P(0 detected in window | ms=+/-1, Ex)
  std::optional<double> prep_err_ms0;    // bound on pumping error into ms=0
  std::optional<double> prep_err_pm1;    // bound on pumping error into ms=+/-1

  double power_ex_nw = 4.8;   // laser powers the targets were taken at
  double power_a1_nw = 7.4;
  double dark_window_us = 100.0;

  void validate() const;

  static CalibrationTargets from_config(const KeyValueConfig& cfg);
  void to_config(KeyValueConfig& cfg) const;
};

struct CalibrationResult {
  RateModel model;
  // Relative residual per equality target, bound violation per bound target.
  std::map<std::string, double> residuals;
  double worst_residual = 0.0;
};

// Invert the calibration targets into a RateModel. Structural parameters
// (gamma_rad, singlet, eta, saturation) are taken from `structural`; the
// excitation rates, mixing probabilities, A1 ISC rate and the dark leak are
// solved for. Forward-checks every target through the exact counting
// oracle; equality residuals above 1% raise CalibrationError.
CalibrationResult calibrate(const CalibrationTargets& targets, const RateModel& structural);

}  // namespace nvsim
