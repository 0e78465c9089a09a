#include "nvsim/pulses.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nvsim/errors.hpp"

namespace nvsim {

void PulseParams::validate() const {
  if (rabi_mhz < 0.0) throw ConfigError("rabi frequency must be >= 0");
  if (duration_us < 0.0) throw ConfigError("pulse duration must be >= 0");
}

double rabi_flip_probability(double omega_mhz, double delta_mhz, double duration_us) {
  if (omega_mhz <= 0.0 || duration_us <= 0.0) return 0.0;
  const double w2 = omega_mhz * omega_mhz;
  const double g2 = w2 + delta_mhz * delta_mhz;
  const double s = std::sin(M_PI * std::sqrt(g2) * duration_us);
  return w2 / g2 * s * s;
}

namespace {

// Addressed branch for a ground-state electron: the branch field of the
// nearest line of the current configuration, or the electron's own branch
// when it already sits in ms = +/-1.
int addressed_branch(const RegisterState& state, const PulseParams& pulse,
                     const HyperfineModel& model) {
  const int ms = ms_of(state.electron);
  if (ms != 0) return ms;
  const double dm = std::abs(pulse.carrier_mhz - model.line_frequency_mhz(state.nuclei, -1));
  const double dp = std::abs(pulse.carrier_mhz - model.line_frequency_mhz(state.nuclei, +1));
  return dm <= dp ? -1 : +1;
}

}  // namespace

double mw_flip_probability(const RegisterState& state, const PulseParams& pulse,
                           const HyperfineModel& model) {
  const int branch = addressed_branch(state, pulse, model);
  const double delta = pulse.carrier_mhz - model.line_frequency_mhz(state.nuclei, branch);
  return rabi_flip_probability(pulse.rabi_mhz, delta, pulse.duration_us);
}

RegisterState mw_pulse(const RegisterState& state, const PulseParams& pulse,
                       const HyperfineModel& model, Rng& rng) {
  pulse.validate();
  if (!is_ground(state.electron))
    throw SequenceError("MW pulse applied while electron is in " + to_string(state.electron));
  const int branch = addressed_branch(state, pulse, model);
  const double p = mw_flip_probability(state, pulse, model);
  RegisterState out = state;
  if (rng.bernoulli(p)) {
    if (ms_of(state.electron) == 0)
      out.electron = branch < 0 ? ElectronLevel::GroundMinus : ElectronLevel::GroundPlus;
    else
      out.electron = ElectronLevel::Ground0;
  }
  return out;
}

double rf_flip_probability(const RegisterState& state, const PulseParams& pulse,
                           const HyperfineModel& model, int nucleus_index) {
  if (nucleus_index < 0 || nucleus_index >= model.n_active_nuclei)
    throw ConfigError("RF pulse addresses an inactive nucleus");
  // The nuclear line shifts by the hyperfine splitting per unit of ms
  // away from the addressed manifold.
  const int ms = ms_of(state.electron);
  double splitting = model.a14_mhz;
  if (nucleus_index == 1) splitting = model.ac1_mhz;
  if (nucleus_index == 2) splitting = model.ac2_mhz;
  const double resonance =
      model.rf_nuclear_mhz + std::abs(ms - model.rf_manifold_ms) * splitting;
  const double delta = pulse.carrier_mhz - resonance;
  // 14N: only the mI -1 <-> 0 transition is addressed; mI = +1 is a
  // spectator. Carbons always sit on their single transition.
  if (nucleus_index == 0 && state.nuclei.mi14 == +1) return 0.0;
  return rabi_flip_probability(pulse.rabi_mhz, delta, pulse.duration_us);
}

RegisterState rf_pulse(const RegisterState& state, const PulseParams& pulse,
                       const HyperfineModel& model, int nucleus_index, Rng& rng) {
  pulse.validate();
  if (!is_ground(state.electron))
    throw SequenceError("RF pulse applied while electron is in " + to_string(state.electron));
  const double p = rf_flip_probability(state, pulse, model, nucleus_index);
  RegisterState out = state;
  if (p > 0.0 && rng.bernoulli(p)) {
    auto& n = out.nuclei;
    if (nucleus_index == 0)
      n.mi14 = (n.mi14 == -1) ? 0 : -1;
    else if (nucleus_index == 1)
      n.mc1_half = -n.mc1_half;
    else
      n.mc2_half = -n.mc2_half;
  }
  return out;
}

SelectivePiResult selective_pi(const RegisterState& state, const NuclearConfig& target_config,
                               int branch, const HyperfineModel& model, double omega_mhz,
                               Rng& rng) {
  if (omega_mhz <= 0.0) throw ConfigError("selective pi needs omega > 0");
  const double carrier = model.line_frequency_mhz(target_config, branch);
  PulseParams pulse{carrier, omega_mhz, 1.0 / (2.0 * omega_mhz)};

  SelectivePiResult result;
  const int n_active = model.n_active_nuclei;
  double nearest = std::numeric_limits<double>::infinity();
  for (const auto& line : enumerate_hyperfine_lines(model, n_active)) {
    const double d = std::abs(line.frequency_mhz - carrier);
    const bool is_target = line.branch == branch && line.config == target_config;
    if (!is_target && d < nearest) nearest = d;
  }
  for (const auto& cfg : NuclearConfig::enumerate(n_active)) {
    RegisterState probe = state;
    probe.nuclei = cfg;
    if (ms_of(probe.electron) != 0) {
      // Evaluate the map for the ms=0 entry point; the actual state's
      // branch detuning is handled by mw_pulse below.
      probe.electron = ElectronLevel::Ground0;
    }
    const double p = mw_flip_probability(probe, pulse, model);
    result.flip_probability[NuclearConfig::index_of(cfg, n_active)] = p;
    if (!(cfg == target_config)) result.worst_leakage = std::max(result.worst_leakage, p);
  }
  if (nearest < omega_mhz) {
    std::ostringstream msg;
    msg << "selectivity: nearest neighbouring line " << nearest << " MHz away at omega "
        << omega_mhz << " MHz; worst-case leakage " << result.worst_leakage;
    result.selectivity_warning = msg.str();
  }

  result.state = mw_pulse(state, pulse, model, rng);
  return result;
}

}  // namespace nvsim
