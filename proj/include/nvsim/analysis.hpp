#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nvsim/protocols.hpp"

namespace nvsim {

// All intervals follow the 2-SE (95%) convention; the *_half fields are
// the 2-SE half widths.
struct FidelityReport {
  double f_ms0 = 0.0, f_ms0_half = 0.0;
  double f_pm1 = 0.0, f_pm1_half = 0.0;
  double f_avg = 0.0, f_avg_half = 0.0;
  long n_shots = 0;
};

inline double binomial_se(double p, long n) {
  return n > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

// declared_* hold one entry per shot, true when the shot declared ms=0.
FidelityReport estimate_fidelity(const std::vector<bool>& declared_bright,
                                 const std::vector<bool>& declared_dark);

// ---- Readout window / division optimisation ---------------------------

struct WindowChoice {
  double duration_us = 0.0;
  int threshold = 1;
  FidelityReport report;
};

// Exhaustive grid search maximising F_avg; ties resolved toward the
// smallest duration, then the smallest threshold.
WindowChoice optimize_window(const ReadoutRecords& records,
                             const std::vector<double>& duration_grid_us,
                             const std::vector<int>& threshold_grid);

struct DivisionChoice {
  double division_us = 0.0;
  double f_r1 = 0.0, f_r1_half = 0.0;
  double f_r2 = 0.0, f_r2_half = 0.0;
  double p_identical = 0.0, p_identical_half = 0.0;
};

// Maximises the balanced criterion min(F_R1, F_R2); P(identical) is
// evaluated on the 50/50 prep mixture.
DivisionChoice optimize_division(const ReadoutRecords& records,
                                 const std::vector<double>& division_grid_us, int threshold);

// ---- Curve fits ---------------------------------------------------------

struct ExpFit {
  double amplitude = 0.0, se_amplitude = 0.0;
  double tau_us = 0.0, se_tau = 0.0;
  double floor = 0.0, se_floor = 0.0;
  bool quality_warning = false;  // non-decaying input or pegged tau
};

// Least-squares a*exp(-t/tau) (+ optional floor).
ExpFit fit_exponential_decay(const std::vector<double>& t_us, const std::vector<double>& rate,
                             bool with_floor = false);

struct Spectrum {
  std::vector<double> freq_mhz;
  std::vector<double> p_ms0;
  std::vector<double> se;
};

enum class HeraldMode { None, Target, Complement };

// Pulsed ESR scan: (optional heralded nuclear prep,) pump ms=0, pi probe
// pulse at each frequency, electron readout.
Spectrum esr_spectrum(const SimModel& model, const ExperimentConfig& exp,
                      const std::vector<double>& freq_grid_mhz, long n_shots,
                      std::uint64_t master_seed, HeraldMode herald = HeraldMode::None,
                      const NuclearConfig& target = {}, int herald_p = 1);

struct GaussianFit {
  double baseline = 0.0;
  std::vector<double> amplitudes;      // dip amplitudes per supplied centre
  std::vector<double> se_amplitudes;
  double ratio = 0.0, se_ratio = 0.0;  // target amplitude / total amplitude
  double residual_norm = 0.0;
};

// Linear least squares with centres fixed at the supplied line positions
// and common width sigma; ratio over the target_lines index set.
GaussianFit fit_gaussians(const Spectrum& spectrum, const std::vector<double>& centers_mhz,
                          double sigma_mhz, const std::vector<int>& target_lines);

struct RabiFit {
  double omega_mhz = 0.0, se_omega = 0.0;
  double visibility = 0.0, se_visibility = 0.0;
  double offset = 0.0, contrast = 0.0;
};

// Multi-line detuned-Rabi fit: y(t) = c0 - c1 * sum_j w_j L_j sin^2(...).
// deltas = carrier detuning per hyperfine line, weights = populations.
RabiFit fit_rabi(const std::vector<double>& t_us, const std::vector<double>& p_ms0,
                 const std::vector<double>& deltas_mhz, const std::vector<double>& weights);

// Evaluate the multi-line Rabi curve (population language, no readout
// errors); shared by the fitter and by oracle computations in tests.
double rabi_population(double t_us, double omega_mhz, const std::vector<double>& deltas_mhz,
                       const std::vector<double>& weights);

// ---- Dwell statistics ----------------------------------------------------

struct DwellStats {
  double bright_mean_us = 0.0;      // bin-debiased (geometric MLE)
  double bright_mean_se = 0.0;
  double bright_raw_mean_us = 0.0;
  double dark_mean_us = 0.0;
  double dark_mean_se = 0.0;
  double dark_raw_mean_us = 0.0;
  double p_ks_bright = 0.0;
  double p_ks_dark = 0.0;
  long n_bright = 0, n_dark = 0;
};

// Requires >= 20 (uncensored) dwells in total, else EstimationError.
DwellStats dwell_statistics(const std::vector<bool>& inferred_bright, double bin_us);

// One-sample Kolmogorov-Smirnov p-value against Exp(mean).
double ks_exponential_pvalue(const std::vector<double>& samples, double mean);

}  // namespace nvsim
