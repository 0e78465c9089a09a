#pragma once

#include <vector>

#include "nvsim/rates.hpp"
#include "nvsim/register.hpp"

namespace nvsim {

// One Markov jump channel. Channels flagged emits_photon produce an
// emission on firing; detection thins emissions by eta and adds dark
// counts, handled by the counting engine.
struct JumpChannel {
  int from = 0;
  int to = 0;
  double rate = 0.0;  // 1/us
  bool emits_photon = false;
};

// A finite continuous-time Markov jump process with marked (photon)
// channels. States are opaque indices; builders below define the layouts.
struct JumpProcess {
  int n_states = 0;
  std::vector<JumpChannel> channels;

  double max_exit_rate() const;
};

// Optional incoherent microwave drive for continuous-readout (quantum
// jump) simulations: ground-state flip rates in 1/us.
struct MwFlipRates {
  double g0_gm = 0.0;
  double gm_g0 = 0.0;
  double g0_gp = 0.0;
  double gp_g0 = 0.0;
};

// Electron-only process over the 6 electron levels (nuclear register
// ignored). State index = static_cast<int>(ElectronLevel).
JumpProcess build_electron_process(const RateModel& rates, const DriveSpec& drive,
                                   const MwFlipRates& mw = {});

// Full register process over electron x nuclear states, including the
// per-optical-cycle nuclear flips (probability q_nuc per active nucleus at
// each radiative decay; 14N moves by +/-1, 13C swaps).
// State index = electron_level * n_configs + config_index.
JumpProcess build_register_process(const RateModel& rates, const DriveSpec& drive,
                                   int n_active_nuclei, const MwFlipRates& mw = {});

// Reduced two-pool model: state 0 = bright, 1 = dark. Bright emits
// *detected* photons at detected_rate (no further thinning) and flips to
// dark at gamma_flip; dark returns at gamma_leak.
JumpProcess build_reduced_process(double detected_rate, double gamma_flip, double gamma_leak);

// Exact detected-photon counting distribution at time `duration`.
// p[c] = P(c detections), c = 0..n_max; remainder = P(count > n_max).
// If keep_joint, joint[c][s] = P(c detections and state s at duration) for
// c <= n_max, and joint[n_max+1][s] is the same for the overflow class.
struct CountingDistribution {
  std::vector<double> p;
  double remainder = 0.0;
  std::vector<std::vector<double>> joint;
};

CountingDistribution exact_counting(const JumpProcess& process, double eta, double dark_rate,
                                    const std::vector<double>& initial, double duration, int n_max,
                                    bool keep_joint = false);

// Transient state distribution at time t (photon marks ignored).
std::vector<double> transient_distribution(const JumpProcess& process,
                                           const std::vector<double>& initial, double t);

// Expected detected photon rate for a given state distribution.
double detected_rate(const JumpProcess& process, double eta, double dark_rate,
                     const std::vector<double>& pop);

// Expected detected rate sampled on a uniform time grid (n_bins bins of
// width bin_us, evaluated at bin centres).
std::vector<double> detected_rate_curve(const JumpProcess& process, double eta, double dark_rate,
                                        const std::vector<double>& initial, double bin_us,
                                        int n_bins);

// Convenience: delta distribution on one state.
std::vector<double> delta_distribution(int n_states, int state);

double total_variation(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace nvsim
