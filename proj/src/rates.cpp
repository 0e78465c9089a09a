#include "nvsim/rates.hpp"

#include <cmath>
#include <sstream>

#include "nvsim/errors.hpp"
#include "nvsim/markov.hpp"

namespace nvsim {

void RateModel::validate() const {
  auto nonneg = [](double v, const char* name) {
    if (v < 0.0 || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be >= 0");
  };
  nonneg(gamma_exc_ex_max, "gamma_exc_ex_max");
  nonneg(gamma_exc_a1_max, "gamma_exc_a1_max");
  nonneg(gamma_rad, "gamma_rad");
  nonneg(gamma_isc_ex, "gamma_isc_ex");
  nonneg(gamma_isc_a1, "gamma_isc_a1");
  nonneg(gamma_singlet, "gamma_singlet");
  nonneg(gamma_leak_dark, "gamma_leak_dark");
  nonneg(dark_rate, "dark_rate");
  if (p_sat_nw <= 0.0) throw ConfigError("p_sat_nw must be positive");
  auto prob = [](double v, const char* name) {
    if (v < 0.0 || v > 1.0) throw ConfigError(std::string(name) + " must be in [0,1]");
  };
  prob(p_mix_ex, "p_mix_ex");
  prob(p_mix_a1, "p_mix_a1");
  prob(beta0, "beta0");
  prob(q_nuc, "q_nuc");
  if (eta <= 0.0 || eta > 1.0) throw ConfigError("eta must be in (0,1]");
  if (gamma_exc_ex_max > 0.0) {
    // The bright pool under Ex must pump out eventually.
    const double exit = gamma_rad * p_mix_ex + gamma_isc_ex * (1.0 - beta0);
    if (exit <= 0.0)
      throw ConfigError("Ex bright pool has no exit channel (p_mix_ex and singlet branching both zero)");
  }
}

RateModel RateModel::from_config(const KeyValueConfig& cfg) {
  RateModel m;
  m.gamma_exc_ex_max = cfg.get_double("rate.gamma_exc_ex_max", m.gamma_exc_ex_max);
  m.gamma_exc_a1_max = cfg.get_double("rate.gamma_exc_a1_max", m.gamma_exc_a1_max);
  m.p_sat_nw = cfg.get_double("rate.p_sat_nw", m.p_sat_nw);
  m.gamma_rad = cfg.get_double("rate.gamma_rad", m.gamma_rad);
  m.gamma_isc_ex = cfg.get_double("rate.gamma_isc_ex", m.gamma_isc_ex);
  m.gamma_isc_a1 = cfg.get_double("rate.gamma_isc_a1", m.gamma_isc_a1);
  m.gamma_singlet = cfg.get_double("rate.gamma_singlet", m.gamma_singlet);
  m.beta0 = cfg.get_double("rate.beta0", m.beta0);
  m.p_mix_ex = cfg.get_double("rate.p_mix_ex", m.p_mix_ex);
  m.p_mix_a1 = cfg.get_double("rate.p_mix_a1", m.p_mix_a1);
  m.gamma_leak_dark = cfg.get_double("rate.gamma_leak_dark", m.gamma_leak_dark);
  m.q_nuc = cfg.get_double("rate.q_nuc", m.q_nuc);
  m.eta = cfg.get_double("rate.eta", m.eta);
  m.dark_rate = cfg.get_double("rate.dark_rate", m.dark_rate);
  m.validate();
  return m;
}

void RateModel::to_config(KeyValueConfig& cfg) const {
  cfg.set_double("rate.gamma_exc_ex_max", gamma_exc_ex_max);
  cfg.set_double("rate.gamma_exc_a1_max", gamma_exc_a1_max);
  cfg.set_double("rate.p_sat_nw", p_sat_nw);
  cfg.set_double("rate.gamma_rad", gamma_rad);
  cfg.set_double("rate.gamma_isc_ex", gamma_isc_ex);
  cfg.set_double("rate.gamma_isc_a1", gamma_isc_a1);
  cfg.set_double("rate.gamma_singlet", gamma_singlet);
  cfg.set_double("rate.beta0", beta0);
  cfg.set_double("rate.p_mix_ex", p_mix_ex);
  cfg.set_double("rate.p_mix_a1", p_mix_a1);
  cfg.set_double("rate.gamma_leak_dark", gamma_leak_dark);
  cfg.set_double("rate.q_nuc", q_nuc);
  cfg.set_double("rate.eta", eta);
  cfg.set_double("rate.dark_rate", dark_rate);
}

void CalibrationTargets::validate() const {
  auto pos = [](const std::optional<double>& v, const char* name) {
    if (v && (*v <= 0.0 || !std::isfinite(*v)))
      throw ConfigError(std::string(name) + " must be positive");
  };
  pos(r0_ms0_kcps, "r0_ms0_kcps");
  pos(tau_flip_ex_us, "tau_flip_ex_us");
  pos(r0_pm1_kcps, "r0_pm1_kcps");
  pos(tau_flip_a1_us, "tau_flip_a1_us");
  auto prob = [](const std::optional<double>& v, const char* name) {
    if (v && (*v <= 0.0 || *v > 1.0))
      throw ConfigError(std::string(name) + " must be in (0,1]");
  };
  prob(p_zero_dark, "p_zero_dark");
  prob(prep_err_ms0, "prep_err_ms0");
  prob(prep_err_pm1, "prep_err_pm1");
  if (power_ex_nw <= 0.0 || power_a1_nw <= 0.0) throw ConfigError("target powers must be positive");
  if (dark_window_us <= 0.0) throw ConfigError("dark window must be positive");
}

CalibrationTargets CalibrationTargets::from_config(const KeyValueConfig& cfg) {
  CalibrationTargets t;
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!cfg.has(key)) return std::nullopt;
    return cfg.get_double(key);
  };
  t.r0_ms0_kcps = opt("target.r0_ms0_kcps");
  t.tau_flip_ex_us = opt("target.tau_flip_ex_us");
  t.r0_pm1_kcps = opt("target.r0_pm1_kcps");
  t.tau_flip_a1_us = opt("target.tau_flip_a1_us");
  t.p_zero_dark = opt("target.p_zero_dark");
  t.prep_err_ms0 = opt("target.prep_err_ms0");
  t.prep_err_pm1 = opt("target.prep_err_pm1");
  t.power_ex_nw = cfg.get_double("target.power_ex_nw", t.power_ex_nw);
  t.power_a1_nw = cfg.get_double("target.power_a1_nw", t.power_a1_nw);
  t.dark_window_us = cfg.get_double("target.dark_window_us", t.dark_window_us);
  t.validate();
  return t;
}

void CalibrationTargets::to_config(KeyValueConfig& cfg) const {
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) cfg.set_double(key, *v);
  };
  put("target.r0_ms0_kcps", r0_ms0_kcps);
  put("target.tau_flip_ex_us", tau_flip_ex_us);
  put("target.r0_pm1_kcps", r0_pm1_kcps);
  put("target.tau_flip_a1_us", tau_flip_a1_us);
  put("target.p_zero_dark", p_zero_dark);
  put("target.prep_err_ms0", prep_err_ms0);
  put("target.prep_err_pm1", prep_err_pm1);
  cfg.set_double("target.power_ex_nw", power_ex_nw);
  cfg.set_double("target.power_a1_nw", power_a1_nw);
  cfg.set_double("target.dark_window_us", dark_window_us);
}

namespace {

constexpr double kKcpsToPerUs = 1e-3;  // kcounts/s -> counts/us

// Initial rate and decay constant of the exact fluorescence curve,
// obtained by log-linear extrapolation from two early samples (after the
// fast optical transient has settled, before the slow leak matters).
struct DecayProbe {
  double r0 = 0.0;
  double tau = 0.0;
};

DecayProbe probe_decay(const RateModel& model, const DriveSpec& drive, int start_level,
                       double tau_guess) {
  const auto proc = build_electron_process(model, drive);
  const double settle = 5.0 / (model.gamma_rad + 1.0);
  const double t0 = std::max(0.05 * tau_guess, settle);
  const double t1 = 3.0 * t0;
  auto pop = delta_distribution(proc.n_states, start_level);
  auto pop0 = transient_distribution(proc, pop, t0);
  auto pop1 = transient_distribution(proc, pop0, t1 - t0);
  const double r_t0 = detected_rate(proc, model.eta, 0.0, pop0);
  const double r_t1 = detected_rate(proc, model.eta, 0.0, pop1);
  if (r_t0 <= 0.0 || r_t1 <= 0.0 || r_t1 >= r_t0) return {r_t0, 0.0};
  DecayProbe p;
  p.tau = (t1 - t0) / std::log(r_t0 / r_t1);
  p.r0 = r_t0 * std::exp(t0 / p.tau);
  return p;
}

double exact_p_zero_dark(const RateModel& model, double power_ex_nw, double window_us) {
  const auto proc = build_electron_process(model, DriveSpec::ex_only(power_ex_nw));
  const auto init = delta_distribution(proc.n_states, static_cast<int>(ElectronLevel::GroundMinus));
  return exact_counting(proc, model.eta, model.dark_rate, init, window_us, 0).p[0];
}

}  // namespace

CalibrationResult calibrate(const CalibrationTargets& targets, const RateModel& structural) {
  targets.validate();
  RateModel m = structural;
  std::map<std::string, double> residuals;

  const double s_ex = targets.power_ex_nw / m.p_sat_nw;
  const double s_a1 = targets.power_a1_nw / m.p_sat_nw;

  // Ex side: quasi-steady inversion of (initial rate, pump-out time).
  if (targets.r0_ms0_kcps && targets.tau_flip_ex_us) {
    const double emission = *targets.r0_ms0_kcps * kKcpsToPerUs / m.eta;
    const double gamma0 = 1.0 / *targets.tau_flip_ex_us;
    if (gamma0 > 0.05 * m.gamma_rad)
      throw CalibrationError("tau_flip_ex too short for the radiative lifetime", gamma0);
    const double occ_ex = emission / m.gamma_rad;  // excited-state occupancy
    const double denom = 1.0 - occ_ex * (1.0 + m.gamma_isc_ex / m.gamma_singlet);
    if (occ_ex >= 1.0 || denom <= 0.0)
      throw CalibrationError("requested Ex emission rate exceeds what gamma_rad allows", occ_ex);
    const double x = (m.gamma_rad + m.gamma_isc_ex) * occ_ex / denom;
    m.gamma_exc_ex_max = x * (1.0 + s_ex) / s_ex;
    const double singlet_exit = occ_ex * m.gamma_isc_ex * (1.0 - m.beta0);
    const double p_mix = (gamma0 - singlet_exit) / emission;
    if (p_mix < 0.0 || p_mix > 1.0)
      throw CalibrationError("Ex pump-out time inconsistent with singlet branching", p_mix);
    m.p_mix_ex = p_mix;
  }

  // A1 side: intersystem crossing carries the pump-out into ms=0.
  if (targets.r0_pm1_kcps && targets.tau_flip_a1_us) {
    const double emission = *targets.r0_pm1_kcps * kKcpsToPerUs / m.eta;
    const double gamma1 = 1.0 / *targets.tau_flip_a1_us;
    const double occ_a1 = emission / m.gamma_rad;
    if (occ_a1 >= 1.0)
      throw CalibrationError("requested A1 emission rate exceeds what gamma_rad allows", occ_a1);
    const double exit_mix = emission * m.p_mix_a1;
    if (m.beta0 <= 0.0 && exit_mix <= 0.0)
      throw CalibrationError("A1 pump-out needs beta0 > 0 or p_mix_a1 > 0", gamma1);
    const double isc = (gamma1 - exit_mix) / (occ_a1 * m.beta0);
    if (isc < 0.0)
      throw CalibrationError("A1 decay time inconsistent with p_mix_a1", isc);
    m.gamma_isc_a1 = isc;
    const double pool_singlet = occ_a1 * isc * (1.0 - m.beta0) / m.gamma_singlet;
    const double pool_ground = 1.0 - occ_a1 * (1.0 + isc / m.gamma_rad) - pool_singlet;
    if (pool_ground <= 0.0)
      throw CalibrationError("A1 bright pool over-occupied; targets inconsistent", pool_ground);
    const double y = occ_a1 * (m.gamma_rad + isc) / pool_ground;
    m.gamma_exc_a1_max = y * (1.0 + s_a1) / s_a1;
  }

  // The quasi-steady inversion is only first-order when the exit rates are
  // not small against the optical cycling (the A1 intersystem crossing is
  // comparable to gamma_rad); polish both sides against the exact curves.
  for (int it = 0; it < 12; ++it) {
    double worst = 0.0;
    if (targets.r0_ms0_kcps && targets.tau_flip_ex_us) {
      const auto p = probe_decay(m, DriveSpec::ex_only(targets.power_ex_nw),
                                 static_cast<int>(ElectronLevel::Ground0), *targets.tau_flip_ex_us);
      if (p.tau <= 0.0) throw CalibrationError("Ex fluorescence does not decay", 1.0);
      const double want_r0 = *targets.r0_ms0_kcps * kKcpsToPerUs;
      const double f_r = want_r0 / p.r0;
      const double f_t = p.tau / *targets.tau_flip_ex_us;
      m.gamma_exc_ex_max *= f_r;
      m.p_mix_ex = std::min(1.0, m.p_mix_ex * f_t);
      worst = std::max({worst, std::abs(f_r - 1.0), std::abs(f_t - 1.0)});
    }
    if (targets.r0_pm1_kcps && targets.tau_flip_a1_us) {
      const auto p = probe_decay(m, DriveSpec::a1_only(targets.power_a1_nw),
                                 static_cast<int>(ElectronLevel::GroundMinus),
                                 *targets.tau_flip_a1_us);
      if (p.tau <= 0.0) throw CalibrationError("A1 fluorescence does not decay", 1.0);
      const double want_r0 = *targets.r0_pm1_kcps * kKcpsToPerUs;
      const double f_r = want_r0 / p.r0;
      const double f_t = p.tau / *targets.tau_flip_a1_us;
      m.gamma_exc_a1_max *= f_r;
      m.gamma_isc_a1 *= f_t;
      worst = std::max({worst, std::abs(f_r - 1.0), std::abs(f_t - 1.0)});
    }
    if (worst < 1e-4) break;
  }

  // Dark leak: root-solve the exact zero-photon probability when the Ex
  // rates are known; otherwise fall back to the pure-exponential reading.
  if (targets.p_zero_dark) {
    const double p_target = *targets.p_zero_dark;
    const double T = targets.dark_window_us;
    if (p_target >= 1.0) {
      m.gamma_leak_dark = 0.0;
    } else if (!targets.r0_ms0_kcps || !targets.tau_flip_ex_us) {
      m.gamma_leak_dark = -std::log(p_target) / T;
    } else {
      double lo = 0.0, hi = -std::log(p_target) / T * 10.0;
      m.gamma_leak_dark = hi;
      if (exact_p_zero_dark(m, targets.power_ex_nw, T) > p_target)
        throw CalibrationError("cannot push P(0|dark) down to target", p_target);
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        m.gamma_leak_dark = mid;
        if (exact_p_zero_dark(m, targets.power_ex_nw, T) > p_target)
          lo = mid;
        else
          hi = mid;
      }
      m.gamma_leak_dark = 0.5 * (lo + hi);
    }
  }

  m.validate();

  // Forward checks against the exact oracle.
  auto rel = [](double got, double want) { return std::abs(got - want) / want; };
  if (targets.r0_ms0_kcps && targets.tau_flip_ex_us) {
    const auto p = probe_decay(m, DriveSpec::ex_only(targets.power_ex_nw),
                               static_cast<int>(ElectronLevel::Ground0), *targets.tau_flip_ex_us);
    residuals["r0_ms0"] = rel(p.r0 / kKcpsToPerUs, *targets.r0_ms0_kcps);
    residuals["tau_flip_ex"] = p.tau > 0 ? rel(p.tau, *targets.tau_flip_ex_us) : 1.0;
  }
  if (targets.r0_pm1_kcps && targets.tau_flip_a1_us) {
    const auto p = probe_decay(m, DriveSpec::a1_only(targets.power_a1_nw),
                               static_cast<int>(ElectronLevel::GroundMinus), *targets.tau_flip_a1_us);
    residuals["r0_pm1"] = rel(p.r0 / kKcpsToPerUs, *targets.r0_pm1_kcps);
    residuals["tau_flip_a1"] = p.tau > 0 ? rel(p.tau, *targets.tau_flip_a1_us) : 1.0;
  }
  if (targets.p_zero_dark && targets.r0_ms0_kcps && targets.tau_flip_ex_us)
    residuals["p_zero_dark"] =
        rel(exact_p_zero_dark(m, targets.power_ex_nw, targets.dark_window_us), *targets.p_zero_dark);

  // Preparation errors are bounds (the sources are lower limits on
  // fidelity): the residual is the relative amount by which the model
  // exceeds them, zero when it is at least as good.
  if (targets.prep_err_pm1 && m.gamma_exc_ex_max > 0.0) {
    const auto proc = build_electron_process(m, DriveSpec::ex_only(targets.power_ex_nw));
    auto pop = transient_distribution(
        proc, delta_distribution(proc.n_states, static_cast<int>(ElectronLevel::Ground0)),
        targets.dark_window_us);
    const double wrong = pop[static_cast<int>(ElectronLevel::Ground0)] +
                         pop[static_cast<int>(ElectronLevel::ExcitedEx)] +
                         pop[static_cast<int>(ElectronLevel::Singlet)];
    residuals["prep_err_pm1"] = std::max(0.0, (wrong - *targets.prep_err_pm1) / *targets.prep_err_pm1);
  }
  if (targets.prep_err_ms0 && m.gamma_exc_a1_max > 0.0 && targets.tau_flip_a1_us) {
    const auto proc = build_electron_process(m, DriveSpec::a1_only(targets.power_a1_nw));
    auto pop = transient_distribution(
        proc, delta_distribution(proc.n_states, static_cast<int>(ElectronLevel::GroundMinus)),
        30.0 * *targets.tau_flip_a1_us);
    const double wrong = 1.0 - pop[static_cast<int>(ElectronLevel::Ground0)];
    residuals["prep_err_ms0"] = std::max(0.0, (wrong - *targets.prep_err_ms0) / *targets.prep_err_ms0);
  }

  CalibrationResult result{m, residuals, 0.0};
  for (const auto& [k, v] : residuals) result.worst_residual = std::max(result.worst_residual, v);
  if (result.worst_residual > 0.01) {
    std::ostringstream msg;
    msg << "calibration forward check failed; residuals:";
    for (const auto& [k, v] : residuals) msg << " " << k << "=" << v;
    throw CalibrationError(msg.str(), result.worst_residual);
  }
  return result;
}

}  // namespace nvsim
