#include "nvsim/protocols.hpp"

#include <algorithm>
#include <cmath>

#include "nvsim/errors.hpp"

namespace nvsim {

void ReadoutConfig::validate() const {
  if (duration_us <= 0.0) throw ConfigError("readout duration must be positive");
  if (threshold < 1) throw ConfigError("readout threshold must be >= 1");
  if (power_nw <= 0.0) throw ConfigError("readout power must be positive");
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& cfg) {
  ExperimentConfig e;
  e.readout.duration_us = cfg.get_double("exp.readout_us", e.readout.duration_us);
  e.readout.threshold = static_cast<int>(cfg.get_int("exp.readout_threshold", e.readout.threshold));
  e.readout.power_nw = cfg.get_double("exp.readout_power_nw", e.readout.power_nw);
  e.pump_ms0_us = cfg.get_double("exp.pump_ms0_us", e.pump_ms0_us);
  e.pump_ms0_power_nw = cfg.get_double("exp.pump_ms0_power_nw", e.pump_ms0_power_nw);
  e.pump_pm1_us = cfg.get_double("exp.pump_pm1_us", e.pump_pm1_us);
  e.pump_pm1_power_nw = cfg.get_double("exp.pump_pm1_power_nw", e.pump_pm1_power_nw);
  e.herald_window_us = cfg.get_double("exp.herald_window_us", e.herald_window_us);
  e.herald_power_nw = cfg.get_double("exp.herald_power_nw", e.herald_power_nw);
  e.omega_selective_mhz = cfg.get_double("exp.omega_selective_mhz", e.omega_selective_mhz);
  e.herald_branch = static_cast<int>(cfg.get_int("exp.herald_branch", e.herald_branch));
  e.prep_repetitions = static_cast<int>(cfg.get_int("exp.prep_repetitions", e.prep_repetitions));
  e.prep_max_attempts = static_cast<int>(cfg.get_int("exp.prep_max_attempts", e.prep_max_attempts));
  e.nuclear_read_us = cfg.get_double("exp.nuclear_read_us", e.nuclear_read_us);
  e.nuclear_reps = static_cast<int>(cfg.get_int("exp.nuclear_reps", e.nuclear_reps));
  e.nuclear_threshold = static_cast<int>(cfg.get_int("exp.nuclear_threshold", e.nuclear_threshold));
  e.nuclear_dark_on_target = cfg.get_bool("exp.nuclear_dark_on_target", e.nuclear_dark_on_target);
  e.omega_probe_mhz = cfg.get_double("exp.omega_probe_mhz", e.omega_probe_mhz);
  e.probe_read_us = cfg.get_double("exp.probe_read_us", e.probe_read_us);
  e.omega_mw_mhz = cfg.get_double("exp.omega_mw_mhz", e.omega_mw_mhz);
  e.omega_rf_mhz = cfg.get_double("exp.omega_rf_mhz", e.omega_rf_mhz);
  e.electron_read_us = cfg.get_double("exp.electron_read_us", e.electron_read_us);
  e.twoq_nuclear_reps = static_cast<int>(cfg.get_int("exp.twoq_nuclear_reps", e.twoq_nuclear_reps));
  e.readout.validate();
  return e;
}

void ExperimentConfig::to_config(KeyValueConfig& cfg) const {
  cfg.set_double("exp.readout_us", readout.duration_us);
  cfg.set_int("exp.readout_threshold", readout.threshold);
  cfg.set_double("exp.readout_power_nw", readout.power_nw);
  cfg.set_double("exp.pump_ms0_us", pump_ms0_us);
  cfg.set_double("exp.pump_ms0_power_nw", pump_ms0_power_nw);
  cfg.set_double("exp.pump_pm1_us", pump_pm1_us);
  cfg.set_double("exp.pump_pm1_power_nw", pump_pm1_power_nw);
  cfg.set_double("exp.herald_window_us", herald_window_us);
  cfg.set_double("exp.herald_power_nw", herald_power_nw);
  cfg.set_double("exp.omega_selective_mhz", omega_selective_mhz);
  cfg.set_int("exp.herald_branch", herald_branch);
  cfg.set_int("exp.prep_repetitions", prep_repetitions);
  cfg.set_int("exp.prep_max_attempts", prep_max_attempts);
  cfg.set_double("exp.nuclear_read_us", nuclear_read_us);
  cfg.set_int("exp.nuclear_reps", nuclear_reps);
  cfg.set_int("exp.nuclear_threshold", nuclear_threshold);
  cfg.set_string("exp.nuclear_dark_on_target", nuclear_dark_on_target ? "true" : "false");
  cfg.set_double("exp.omega_probe_mhz", omega_probe_mhz);
  cfg.set_double("exp.probe_read_us", probe_read_us);
  cfg.set_double("exp.omega_mw_mhz", omega_mw_mhz);
  cfg.set_double("exp.omega_rf_mhz", omega_rf_mhz);
  cfg.set_double("exp.electron_read_us", electron_read_us);
  cfg.set_int("exp.twoq_nuclear_reps", twoq_nuclear_reps);
}

NuclearConfig random_nuclear_config(int n_active, Rng& rng) {
  const int n = NuclearConfig::count(n_active);
  return NuclearConfig::from_index(static_cast<int>(rng.uniform_int(n)), n_active);
}

double pooled_pump_out_time(const RateModel& r, const DriveSpec& d) {
  double exit = 0.0;
  if (d.ex) {
    const double x = r.excitation_ex(d.power_ex_nw);
    const double occ = x / (x + r.gamma_rad + r.gamma_isc_ex);
    exit += r.gamma_rad * occ * r.p_mix_ex + occ * r.gamma_isc_ex * (1.0 - r.beta0);
  }
  if (d.a1) {
    const double y = r.excitation_a1(d.power_a1_nw);
    const double occ = y / (y + r.gamma_rad + r.gamma_isc_a1);
    exit += r.gamma_rad * occ * r.p_mix_a1 + occ * r.gamma_isc_a1 * r.beta0;
  }
  if (exit <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / exit;
}

PumpResult pump(const RegisterState& state, PumpTarget target, double duration_us,
                double power_nw, const SimModel& model, Rng& rng) {
  const DriveSpec drive = target == PumpTarget::Ms0 ? DriveSpec::a1_only(power_nw)
                                                    : DriveSpec::ex_only(power_nw);
  PumpResult out;
  out.underpumped_warning =
      duration_us > 0.0 && duration_us < 3.0 * pooled_pump_out_time(model.rates, drive);
  TrajectorySampler sampler(model.rates, drive, model.hf);
  RegisterState s = state;
  const auto traj = sampler.run(s, duration_us, rng, RecordLevel::CountsOnly);
  relax_to_ground(s, model.rates, model.hf, rng);
  out.state = s;
  out.counts = traj.detected_count;
  return out;
}

ShotOutcome single_shot_readout(const RegisterState& state, const ReadoutConfig& cfg,
                                const SimModel& model, Rng& rng) {
  cfg.validate();
  TrajectorySampler sampler(model.rates, DriveSpec::ex_only(cfg.power_nw), model.hf);
  RegisterState s = state;
  const auto traj = sampler.run(s, cfg.duration_us, rng, RecordLevel::CountsOnly);
  relax_to_ground(s, model.rates, model.hf, rng);
  ShotOutcome out;
  out.counts = traj.detected_count;
  out.declared = declare(out.counts, cfg.threshold);
  out.post_state = s;
  return out;
}

std::pair<ShotOutcome, ShotOutcome> two_segment_readout(const RegisterState& state,
                                                        double division_us, double total_us,
                                                        const ReadoutConfig& cfg,
                                                        const SimModel& model, Rng& rng) {
  if (!(division_us > 0.0 && division_us < total_us))
    throw ConfigError("division must satisfy 0 < division < total");
  TrajectorySampler sampler(model.rates, DriveSpec::ex_only(cfg.power_nw), model.hf);
  RegisterState s = state;
  const auto traj = sampler.run(s, total_us, rng, RecordLevel::DetectedOnly);
  relax_to_ground(s, model.rates, model.hf, rng);
  int c1 = 0, c2 = 0;
  for (double t : traj.detected) (t < division_us ? c1 : c2)++;
  ShotOutcome r1{c1, declare(c1, cfg.threshold), s, true};
  ShotOutcome r2{c2, declare(c2, cfg.threshold), s, true};
  return {r1, r2};
}

ReadoutRecords readout_records(long n_shots_each, double max_duration_us, const SimModel& model,
                               const ExperimentConfig& exp, std::uint64_t master_seed) {
  ReadoutRecords rec;
  rec.duration_us = max_duration_us;
  rec.bright.reserve(n_shots_each);
  rec.dark.reserve(n_shots_each);
  TrajectorySampler readout(model.rates, DriveSpec::ex_only(exp.readout.power_nw), model.hf);
  for (long shot = 0; shot < 2 * n_shots_each; ++shot) {
    Rng rng = Rng::stream(master_seed, static_cast<std::uint64_t>(shot));
    const bool bright = shot < n_shots_each;
    RegisterState s;
    s.nuclei = random_nuclear_config(model.hf.n_active_nuclei, rng);
    const auto prepped = bright ? pump(s, PumpTarget::Ms0, exp.pump_ms0_us,
                                       exp.pump_ms0_power_nw, model, rng)
                                : pump(s, PumpTarget::MsPm1, exp.pump_pm1_us,
                                       exp.pump_pm1_power_nw, model, rng);
    s = prepped.state;
    const auto traj = readout.run(s, max_duration_us, rng, RecordLevel::DetectedOnly);
    (bright ? rec.bright : rec.dark).push_back(traj.detected);
  }
  return rec;
}

std::vector<ConditionedRabiPoint> conditioned_rabi(const ConditionedRabiConfig& cfg,
                                                   const SimModel& model,
                                                   const ExperimentConfig& exp,
                                                   std::uint64_t master_seed) {
  std::vector<ConditionedRabiPoint> out;
  double carrier = cfg.mw_carrier_mhz;
  if (carrier <= 0.0) {
    // Centre line of the -1 branch: mI = 0, carbons averaged out.
    NuclearConfig centre;
    centre.mi14 = 0;
    if (model.hf.n_active_nuclei >= 2) centre.mc1_half = +1;
    if (model.hf.n_active_nuclei >= 3) centre.mc2_half = +1;
    carrier = model.hf.line_frequency_mhz(centre, -1);
  }
  TrajectorySampler readout(model.rates, DriveSpec::ex_only(exp.readout.power_nw), model.hf);
  std::uint64_t shot_counter = 0;
  for (double t_mw : cfg.mw_durations_us) {
    ConditionedRabiPoint pt;
    pt.mw_duration_us = t_mw;
    long herald_and_ms0 = 0, uncond_ms0 = 0;
    for (long i = 0; i < cfg.n_shots; ++i) {
      Rng rng = Rng::stream(master_seed, shot_counter++);
      RegisterState s;
      s.nuclei = random_nuclear_config(model.hf.n_active_nuclei, rng);
      s = pump(s, PumpTarget::Ms0, exp.pump_ms0_us, exp.pump_ms0_power_nw, model, rng).state;
      if (t_mw > 0.0)
        s = mw_pulse(s, PulseParams{carrier, cfg.mw_rabi_mhz, t_mw}, model.hf, rng);
      const auto traj = readout.run(s, exp.readout.duration_us, rng, RecordLevel::DetectedOnly);
      int c1 = 0, c2 = 0;
      for (double t : traj.detected) (t < cfg.r1_window_us ? c1 : c2)++;
      const bool ms0 = declare(c2, exp.readout.threshold) == SpinClass::Ms0;
      ++pt.n;
      if (ms0) ++uncond_ms0;
      if (c1 >= 1) {
        ++pt.n_herald;
        if (ms0) ++herald_and_ms0;
      }
    }
    auto rate = [](long k, long n) { return n > 0 ? static_cast<double>(k) / n : 0.0; };
    auto se = [](double p, long n) { return n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0; };
    pt.p_uncond = rate(uncond_ms0, pt.n);
    pt.se_uncond = se(pt.p_uncond, pt.n);
    pt.p_cond = rate(herald_and_ms0, pt.n_herald);
    pt.se_cond = se(pt.p_cond, pt.n_herald);
    out.push_back(pt);
  }
  return out;
}

double mw_flip_rate(double omega_mhz, double delta_mhz, double gamma_m) {
  if (omega_mhz <= 0.0 || gamma_m <= 0.0) return 0.0;
  const double w = 2.0 * M_PI * omega_mhz;
  const double d = 2.0 * M_PI * delta_mhz;
  return (w * w / (2.0 * gamma_m)) / (1.0 + (d / gamma_m) * (d / gamma_m));
}

std::pair<std::vector<int>, std::vector<int>> segment_dwells(const std::vector<bool>& bright) {
  std::vector<int> runs_bright, runs_dark;
  std::size_t i = 0;
  std::vector<std::pair<bool, int>> runs;
  while (i < bright.size()) {
    std::size_t j = i;
    while (j < bright.size() && bright[j] == bright[i]) ++j;
    runs.push_back({bright[i], static_cast<int>(j - i)});
    i = j;
  }
  // First and last runs are censored by the trace boundaries.
  for (std::size_t k = 1; k + 1 < runs.size(); ++k)
    (runs[k].first ? runs_bright : runs_dark).push_back(runs[k].second);
  return {runs_bright, runs_dark};
}

QuantumJumpTrace quantum_jump_trace(const JumpTraceConfig& cfg, const SimModel& model, Rng& rng) {
  const DriveSpec drive = DriveSpec::ex_only(cfg.power_nw);
  // Effective optical measurement rate: quasi-steady emission per bright atom.
  const double x = model.rates.excitation_ex(cfg.power_nw);
  const double gamma_m =
      model.rates.gamma_rad * x / (x + model.rates.gamma_rad + model.rates.gamma_isc_ex);
  MwFlipRates mw;
  mw.g0_gm = mw.gm_g0 = mw_flip_rate(cfg.mw_rabi_mhz, cfg.mw_delta_minus_mhz, gamma_m);
  mw.g0_gp = mw.gp_g0 = mw_flip_rate(cfg.mw_rabi_mhz, cfg.mw_delta_plus_mhz, gamma_m);

  TrajectorySampler sampler(model.rates, drive, model.hf, mw);
  RegisterState s;
  const auto traj = sampler.run(s, cfg.total_us, rng, RecordLevel::DetectedOnly);

  QuantumJumpTrace out;
  const int n_bins = static_cast<int>(cfg.total_us / cfg.bin_us);
  out.bin_counts.assign(n_bins, 0);
  for (double t : traj.detected) {
    const int b = static_cast<int>(t / cfg.bin_us);
    if (b >= 0 && b < n_bins) ++out.bin_counts[b];
  }
  out.inferred_bright.reserve(n_bins);
  for (int c : out.bin_counts) out.inferred_bright.push_back(c >= cfg.bin_threshold);
  const auto [rb, rd] = segment_dwells(out.inferred_bright);
  for (int k : rb) out.bright_dwells_us.push_back(k * cfg.bin_us);
  for (int k : rd) out.dark_dwells_us.push_back(k * cfg.bin_us);
  return out;
}

PrepareResult prepare_nuclear(const RegisterState& state, const NuclearConfig& target, int p,
                              const SimModel& model, const ExperimentConfig& exp, Rng& rng,
                              bool select_complement) {
  if (p < 1) throw ConfigError("prepare_nuclear needs p >= 1");
  TrajectorySampler herald_read(model.rates, DriveSpec::ex_only(exp.herald_power_nw), model.hf);
  PrepareResult out;
  out.state = state;
  for (int attempt = 0; attempt < exp.prep_max_attempts; ++attempt) {
    ++out.attempts;
    bool all_heralded = true;
    for (int rep = 0; rep < p && all_heralded; ++rep) {
      if (select_complement)
        out.state = pump(out.state, PumpTarget::Ms0, exp.pump_ms0_us, exp.pump_ms0_power_nw,
                         model, rng)
                        .state;
      else
        out.state = pump(out.state, PumpTarget::MsPm1, exp.pump_pm1_us, exp.pump_pm1_power_nw,
                         model, rng)
                        .state;
      auto sel = selective_pi(out.state, target, exp.herald_branch, model.hf,
                              exp.omega_selective_mhz, rng);
      out.state = sel.state;
      const auto read = herald_read.run(out.state, exp.herald_window_us, rng,
                                        RecordLevel::CountsOnly);
      relax_to_ground(out.state, model.rates, model.hf, rng);
      if (read.detected_count < 1) all_heralded = false;
    }
    if (all_heralded) {
      out.heralded = true;
      return out;
    }
  }
  out.heralded = false;
  return out;
}

NuclearReadoutResult repetitive_nuclear_readout(const RegisterState& state,
                                                const NuclearConfig& target, int k, int threshold,
                                                bool dark_on_target, const SimModel& model,
                                                const ExperimentConfig& exp, Rng& rng) {
  if (k < 1) throw ConfigError("repetitive readout needs k >= 1");
  NuclearReadoutResult out;
  out.state = state;
  TrajectorySampler readout(model.rates, DriveSpec::ex_only(exp.readout.power_nw), model.hf);
  for (int rep = 0; rep < k; ++rep) {
    if (dark_on_target)
      out.state =
          pump(out.state, PumpTarget::Ms0, exp.pump_ms0_us, exp.pump_ms0_power_nw, model, rng)
              .state;
    else
      out.state =
          pump(out.state, PumpTarget::MsPm1, exp.pump_pm1_us, exp.pump_pm1_power_nw, model, rng)
              .state;
    out.state = selective_pi(out.state, target, exp.herald_branch, model.hf,
                             exp.omega_selective_mhz, rng)
                    .state;
    const auto read = readout.run(out.state, exp.nuclear_read_us, rng, RecordLevel::CountsOnly);
    relax_to_ground(out.state, model.rates, model.hf, rng);
    out.total_counts += read.detected_count;
    out.state = selective_pi(out.state, target, exp.herald_branch, model.hf,
                             exp.omega_selective_mhz, rng)
                    .state;
  }
  out.in_target = dark_on_target ? out.total_counts < threshold : out.total_counts >= threshold;
  return out;
}

std::vector<TwoQubitPixel> two_qubit_experiment(const std::vector<double>& rf_grid_us,
                                                const std::vector<double>& mw_grid_us,
                                                long n_shots, const SimModel& model,
                                                const ExperimentConfig& exp,
                                                std::uint64_t master_seed) {
  NuclearConfig target;
  target.mi14 = -1;
  if (model.hf.n_active_nuclei >= 2) target.mc1_half = +1;
  if (model.hf.n_active_nuclei >= 3) target.mc2_half = +1;
  const double mw_carrier = model.hf.line_frequency_mhz(target, exp.herald_branch);
  const double rf_carrier = model.hf.rf_nuclear_mhz;
  ReadoutConfig electron_read{exp.electron_read_us, exp.readout.threshold, exp.readout.power_nw};

  std::vector<TwoQubitPixel> pixels;
  std::uint64_t shot_counter = 0;
  for (double t_mw : mw_grid_us) {
    for (double t_rf : rf_grid_us) {
      TwoQubitPixel px;
      px.rf_us = t_rf;
      px.mw_us = t_mw;
      for (long i = 0; i < n_shots; ++i) {
        Rng rng = Rng::stream(master_seed, shot_counter++);
        RegisterState s;
        s.nuclei = random_nuclear_config(model.hf.n_active_nuclei, rng);
        const auto prep = prepare_nuclear(s, target, exp.prep_repetitions, model, exp, rng);
        if (!prep.heralded) {
          ++px.n_rejected;
          continue;
        }
        s = prep.state;
        if (t_rf > 0.0)
          s = rf_pulse(s, PulseParams{rf_carrier, exp.omega_rf_mhz, t_rf}, model.hf, 0, rng);
        if (t_mw > 0.0)
          s = mw_pulse(s, PulseParams{mw_carrier, exp.omega_mw_mhz, t_mw}, model.hf, rng);
        const auto eread = single_shot_readout(s, electron_read, model, rng);
        s = eread.post_state;
        const auto nread = repetitive_nuclear_readout(
            s, target, exp.twoq_nuclear_reps, exp.nuclear_threshold, exp.nuclear_dark_on_target,
            model, exp, rng);
        ++px.n;
        const bool e0 = eread.declared == SpinClass::Ms0;
        if (e0) ++px.n_e0;
        if (nread.in_target) ++px.n_nuc;
        if (e0 && nread.in_target) ++px.n_e0_nuc;
      }
      pixels.push_back(px);
    }
  }
  return pixels;
}

bool charge_resonance_check(const RegisterState& state, double p_reject, Rng& rng) {
  if (p_reject < 0.0 || p_reject > 1.0) throw ConfigError("p_reject must be in [0,1]");
  if (!state.charge_ok) return false;
  return !rng.bernoulli(p_reject);
}

}  // namespace nvsim
