#include "nvsim/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "nvsim/errors.hpp"

namespace nvsim {

namespace {

// In-place Cholesky solve of the SPD system A x = b (row-major n x n).
// Returns false when the factorisation breaks down (singular design).
bool solve_spd(std::vector<double> a, std::vector<double> b, int n, std::vector<double>& x) {
  for (int j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (int k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (d <= 0.0 || !std::isfinite(d)) return false;
    a[j * n + j] = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (int k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / a[j * n + j];
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
    b[i] = s / a[i * n + i];
  }
  x = b;
  return true;
}

// Inverse of an SPD matrix via Cholesky, for parameter covariances.
bool invert_spd(const std::vector<double>& a, int n, std::vector<double>& inv) {
  inv.assign(n * n, 0.0);
  for (int c = 0; c < n; ++c) {
    std::vector<double> e(n, 0.0);
    e[c] = 1.0;
    std::vector<double> col;
    if (!solve_spd(a, e, n, col)) return false;
    for (int r = 0; r < n; ++r) inv[r * n + c] = col[r];
  }
  return true;
}

int count_in_window(const std::vector<double>& sorted_ts, double lo, double hi) {
  auto a = std::lower_bound(sorted_ts.begin(), sorted_ts.end(), lo);
  auto b = std::lower_bound(sorted_ts.begin(), sorted_ts.end(), hi);
  return static_cast<int>(b - a);
}

}  // namespace

FidelityReport estimate_fidelity(const std::vector<bool>& declared_bright,
                                 const std::vector<bool>& declared_dark) {
  if (declared_bright.empty() || declared_dark.empty())
    throw EstimationError("estimate_fidelity: empty outcome list");
  FidelityReport r;
  long k0 = std::count(declared_bright.begin(), declared_bright.end(), true);
  long k1 = std::count(declared_dark.begin(), declared_dark.end(), false);
  const long n0 = static_cast<long>(declared_bright.size());
  const long n1 = static_cast<long>(declared_dark.size());
  r.f_ms0 = static_cast<double>(k0) / n0;
  r.f_pm1 = static_cast<double>(k1) / n1;
  r.f_avg = (r.f_ms0 + r.f_pm1) / 2.0;
  r.f_ms0_half = 2.0 * binomial_se(r.f_ms0, n0);
  r.f_pm1_half = 2.0 * binomial_se(r.f_pm1, n1);
  r.f_avg_half = std::sqrt(r.f_ms0_half * r.f_ms0_half + r.f_pm1_half * r.f_pm1_half) / 2.0;
  r.n_shots = n0 + n1;
  return r;
}

WindowChoice optimize_window(const ReadoutRecords& records,
                             const std::vector<double>& duration_grid_us,
                             const std::vector<int>& threshold_grid) {
  if (duration_grid_us.empty() || threshold_grid.empty())
    throw EstimationError("optimize_window: empty grid");
  WindowChoice best;
  double best_f = -1.0;
  for (double d : duration_grid_us) {
    if (d > records.duration_us + 1e-9)
      throw EstimationError("optimize_window: records do not cover the requested duration");
    for (int k : threshold_grid) {
      std::vector<bool> b, dk;
      b.reserve(records.bright.size());
      dk.reserve(records.dark.size());
      for (const auto& ts : records.bright) b.push_back(count_in_window(ts, 0.0, d) >= k);
      for (const auto& ts : records.dark) dk.push_back(count_in_window(ts, 0.0, d) >= k);
      const auto rep = estimate_fidelity(b, dk);
      if (rep.f_avg > best_f + 1e-15) {
        best_f = rep.f_avg;
        best = {d, k, rep};
      }
    }
  }
  return best;
}

DivisionChoice optimize_division(const ReadoutRecords& records,
                                 const std::vector<double>& division_grid_us, int threshold) {
  if (division_grid_us.empty()) throw EstimationError("optimize_division: empty grid");
  const double total = records.duration_us;
  DivisionChoice best;
  double best_min = -1.0;
  for (double d : division_grid_us) {
    if (!(d > 0.0 && d < total))
      throw EstimationError("optimize_division: division outside (0, total)");
    std::vector<bool> r1b, r1d, r2b, r2d;
    long ident = 0, n_all = 0;
    auto scan = [&](const std::vector<std::vector<double>>& recs, std::vector<bool>& o1,
                    std::vector<bool>& o2) {
      for (const auto& ts : recs) {
        const bool m1 = count_in_window(ts, 0.0, d) >= threshold;
        const bool m2 = count_in_window(ts, d, total) >= threshold;
        o1.push_back(m1);
        o2.push_back(m2);
        if (m1 == m2) ++ident;
        ++n_all;
      }
    };
    scan(records.bright, r1b, r2b);
    scan(records.dark, r1d, r2d);
    const auto f1 = estimate_fidelity(r1b, r1d);
    const auto f2 = estimate_fidelity(r2b, r2d);
    const double balanced = std::min(f1.f_avg, f2.f_avg);
    if (balanced > best_min + 1e-15) {
      best_min = balanced;
      const double pid = static_cast<double>(ident) / n_all;
      best = {d,       f1.f_avg, f1.f_avg_half, f2.f_avg, f2.f_avg_half,
              pid,     2.0 * binomial_se(pid, n_all)};
    }
  }
  return best;
}

ExpFit fit_exponential_decay(const std::vector<double>& t_us, const std::vector<double>& rate,
                             bool with_floor) {
  const int n = static_cast<int>(t_us.size());
  if (n < 10 || rate.size() != t_us.size())
    throw EstimationError("fit_exponential_decay: need >= 10 bins");
  if (rate[0] <= 0.0 && rate[1] <= 0.0)
    throw EstimationError("fit_exponential_decay: non-positive initial bins");

  const double t_span = t_us.back() - t_us.front();
  const double tau_cap = 50.0 * t_span;

  ExpFit fit;
  // Initial guesses: floor from the tail, tau from a log-linear regression
  // over the clearly-decaying part.
  double c0 = 0.0;
  if (with_floor) {
    int k = std::max(1, n / 10);
    for (int i = n - k; i < n; ++i) c0 += rate[i];
    c0 /= k;
  }
  double ymax = *std::max_element(rate.begin(), rate.end());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (int i = 0; i < n; ++i) {
    const double v = rate[i] - c0;
    if (v > std::max(1e-12, 0.05 * (ymax - c0))) {
      const double ly = std::log(v);
      sx += t_us[i];
      sy += ly;
      sxx += t_us[i] * t_us[i];
      sxy += t_us[i] * ly;
      ++m;
    }
  }
  double slope = 0.0, icept = std::log(std::max(ymax - c0, 1e-12));
  if (m >= 2) {
    const double det = m * sxx - sx * sx;
    if (det > 0) {
      slope = (m * sxy - sx * sy) / det;
      icept = (sy * sxx - sx * sxy) / det;
    }
  }
  double tau = slope < -1e-12 ? -1.0 / slope : tau_cap;
  double a = std::exp(icept);
  if (tau >= tau_cap) fit.quality_warning = true;
  tau = std::min(tau, tau_cap);

  // Gauss-Newton refinement with step damping.
  const int np = with_floor ? 3 : 2;
  auto ssr_of = [&](double aa, double tt, double cc) {
    double s = 0;
    for (int i = 0; i < n; ++i) {
      const double r = rate[i] - (aa * std::exp(-t_us[i] / tt) + cc);
      s += r * r;
    }
    return s;
  };
  double ssr = ssr_of(a, tau, c0);
  std::vector<double> jtj(np * np), jtr(np);
  for (int it = 0; it < 60; ++it) {
    std::fill(jtj.begin(), jtj.end(), 0.0);
    std::fill(jtr.begin(), jtr.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const double e = std::exp(-t_us[i] / tau);
      const double model = a * e + c0;
      const double r = rate[i] - model;
      const double j[3] = {e, a * e * t_us[i] / (tau * tau), 1.0};
      for (int p = 0; p < np; ++p) {
        jtr[p] += j[p] * r;
        for (int q = 0; q < np; ++q) jtj[p * np + q] += j[p] * j[q];
      }
    }
    std::vector<double> step;
    if (!solve_spd(jtj, jtr, np, step)) break;
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 12; ++half) {
      double a2 = a + scale * step[0];
      double tau2 = tau + scale * step[1];
      double c2 = with_floor ? c0 + scale * step[2] : 0.0;
      if (tau2 > 0 && tau2 <= tau_cap && a2 > 0) {
        const double s2 = ssr_of(a2, tau2, c2);
        if (s2 < ssr) {
          a = a2;
          tau = tau2;
          c0 = c2;
          ssr = s2;
          moved = true;
          break;
        }
      }
      scale *= 0.5;
    }
    if (!moved) break;
  }

  fit.amplitude = a;
  fit.tau_us = tau;
  fit.floor = c0;
  if (tau >= tau_cap * 0.999) fit.quality_warning = true;

  // Covariances from the final Jacobian.
  std::fill(jtj.begin(), jtj.end(), 0.0);
  for (int i = 0; i < n; ++i) {
    const double e = std::exp(-t_us[i] / tau);
    const double j[3] = {e, a * e * t_us[i] / (tau * tau), 1.0};
    for (int p = 0; p < np; ++p)
      for (int q = 0; q < np; ++q) jtj[p * np + q] += j[p] * j[q];
  }
  std::vector<double> cov;
  if (n > np && invert_spd(jtj, np, cov)) {
    const double s2 = ssr / (n - np);
    fit.se_amplitude = std::sqrt(std::max(0.0, cov[0] * s2));
    fit.se_tau = std::sqrt(std::max(0.0, cov[1 * np + 1] * s2));
    if (with_floor) fit.se_floor = std::sqrt(std::max(0.0, cov[2 * np + 2] * s2));
  }
  return fit;
}

Spectrum esr_spectrum(const SimModel& model, const ExperimentConfig& exp,
                      const std::vector<double>& freq_grid_mhz, long n_shots,
                      std::uint64_t master_seed, HeraldMode herald, const NuclearConfig& target,
                      int herald_p) {
  Spectrum spec;
  ReadoutConfig probe_read{exp.probe_read_us, exp.readout.threshold, exp.readout.power_nw};
  const double pi_duration = 1.0 / (2.0 * exp.omega_probe_mhz);
  std::uint64_t counter = 0;
  for (double f : freq_grid_mhz) {
    long n_ok = 0, n_ms0 = 0;
    for (long i = 0; i < n_shots; ++i) {
      Rng rng = Rng::stream(master_seed, counter++);
      RegisterState s;
      s.nuclei = random_nuclear_config(model.hf.n_active_nuclei, rng);
      if (herald != HeraldMode::None) {
        const auto prep = prepare_nuclear(s, target, herald_p, model, exp, rng,
                                          herald == HeraldMode::Complement);
        if (!prep.heralded) continue;
        s = prep.state;
      }
      s = pump(s, PumpTarget::Ms0, exp.pump_ms0_us, exp.pump_ms0_power_nw, model, rng).state;
      s = mw_pulse(s, PulseParams{f, exp.omega_probe_mhz, pi_duration}, model.hf, rng);
      const auto outcome = single_shot_readout(s, probe_read, model, rng);
      ++n_ok;
      if (outcome.declared == SpinClass::Ms0) ++n_ms0;
    }
    const double p = n_ok > 0 ? static_cast<double>(n_ms0) / n_ok : 0.0;
    spec.freq_mhz.push_back(f);
    spec.p_ms0.push_back(p);
    spec.se.push_back(binomial_se(p, n_ok));
  }
  return spec;
}

GaussianFit fit_gaussians(const Spectrum& spectrum, const std::vector<double>& centers_mhz,
                          double sigma_mhz, const std::vector<int>& target_lines) {
  const int n = static_cast<int>(spectrum.freq_mhz.size());
  const int k = static_cast<int>(centers_mhz.size());
  if (n < k + 1) throw EstimationError("fit_gaussians: more lines than data points");
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (std::abs(centers_mhz[i] - centers_mhz[j]) < 1e-9 * std::max(1.0, std::abs(centers_mhz[i])))
        throw EstimationError("fit_gaussians: coincident line centres, design is singular");

  // Model: y = baseline - sum_j amp_j * G_j(f). Columns: [1, -G_1, .. -G_k].
  const int p = k + 1;
  std::vector<double> design(n * p);
  for (int i = 0; i < n; ++i) {
    design[i * p + 0] = 1.0;
    for (int j = 0; j < k; ++j) {
      const double z = (spectrum.freq_mhz[i] - centers_mhz[j]) / sigma_mhz;
      design[i * p + 1 + j] = -std::exp(-0.5 * z * z);
    }
  }
  std::vector<double> ata(p * p, 0.0), aty(p, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < p; ++a) {
      aty[a] += design[i * p + a] * spectrum.p_ms0[i];
      for (int b = 0; b < p; ++b) ata[a * p + b] += design[i * p + a] * design[i * p + b];
    }
  }
  std::vector<double> coef;
  if (!solve_spd(ata, aty, p, coef))
    throw EstimationError("fit_gaussians: singular design (degenerate lines)");

  GaussianFit fit;
  fit.baseline = coef[0];
  fit.amplitudes.assign(coef.begin() + 1, coef.end());

  double ssr = 0.0, signal = 0.0;
  for (int i = 0; i < n; ++i) {
    double model = 0.0;
    for (int a = 0; a < p; ++a) model += design[i * p + a] * coef[a];
    ssr += (spectrum.p_ms0[i] - model) * (spectrum.p_ms0[i] - model);
    signal += spectrum.p_ms0[i] * spectrum.p_ms0[i];
  }
  fit.residual_norm = signal > 0 ? std::sqrt(ssr / signal) : 0.0;

  std::vector<double> cov;
  const double s2 = n > p ? ssr / (n - p) : 0.0;
  if (!invert_spd(ata, p, cov)) cov.assign(p * p, 0.0);
  fit.se_amplitudes.resize(k);
  for (int j = 0; j < k; ++j)
    fit.se_amplitudes[j] = std::sqrt(std::max(0.0, cov[(j + 1) * p + (j + 1)] * s2));

  double total = 0.0, targ = 0.0;
  for (int j = 0; j < k; ++j) total += fit.amplitudes[j];
  for (int j : target_lines) targ += fit.amplitudes.at(j);
  fit.ratio = total != 0.0 ? targ / total : 0.0;
  // Delta-method propagation over the amplitude covariance block.
  if (total != 0.0) {
    std::vector<double> grad(k);
    for (int j = 0; j < k; ++j) {
      const bool in_t = std::find(target_lines.begin(), target_lines.end(), j) != target_lines.end();
      grad[j] = ((in_t ? 1.0 : 0.0) * total - targ) / (total * total);
    }
    double var = 0.0;
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) var += grad[a] * grad[b] * cov[(a + 1) * p + (b + 1)] * s2;
    fit.se_ratio = std::sqrt(std::max(0.0, var));
  }
  return fit;
}

double rabi_population(double t_us, double omega_mhz, const std::vector<double>& deltas_mhz,
                       const std::vector<double>& weights) {
  double p = 0.0;
  for (std::size_t j = 0; j < deltas_mhz.size(); ++j) {
    const double g2 = omega_mhz * omega_mhz + deltas_mhz[j] * deltas_mhz[j];
    const double s = std::sin(M_PI * std::sqrt(g2) * t_us);
    p += weights[j] * (omega_mhz * omega_mhz / g2) * s * s;
  }
  return p;
}

RabiFit fit_rabi(const std::vector<double>& t_us, const std::vector<double>& p_ms0,
                 const std::vector<double>& deltas_mhz, const std::vector<double>& weights) {
  const int n = static_cast<int>(t_us.size());
  if (n < 4) throw EstimationError("fit_rabi: too few points");
  if (deltas_mhz.size() != weights.size() || deltas_mhz.empty())
    throw EstimationError("fit_rabi: line table empty or mismatched");

  // Separable least squares: linear in (c0, c1) at fixed Omega.
  auto sse_at = [&](double omega, double* c0_out, double* c1_out) {
    double s_gg = 0, s_g = 0, s_y = 0, s_gy = 0;
    for (int i = 0; i < n; ++i) {
      const double g = rabi_population(t_us[i], omega, deltas_mhz, weights);
      s_gg += g * g;
      s_g += g;
      s_y += p_ms0[i];
      s_gy += g * p_ms0[i];
    }
    const double det = n * s_gg - s_g * s_g;
    double c1 = 0.0, c0 = s_y / n;
    if (std::abs(det) > 1e-12) {
      c1 = -(n * s_gy - s_g * s_y) / det;
      c0 = (s_y + c1 * s_g) / n;
    }
    double sse = 0;
    for (int i = 0; i < n; ++i) {
      const double g = rabi_population(t_us[i], omega, deltas_mhz, weights);
      const double r = p_ms0[i] - (c0 - c1 * g);
      sse += r * r;
    }
    if (c0_out) *c0_out = c0;
    if (c1_out) *c1_out = c1;
    return sse;
  };

  double best_omega = 0.0, best_sse = std::numeric_limits<double>::infinity();
  for (double lw = std::log(0.02); lw <= std::log(30.0); lw += 0.02) {
    const double w = std::exp(lw);
    const double s = sse_at(w, nullptr, nullptr);
    if (s < best_sse) {
      best_sse = s;
      best_omega = w;
    }
  }
  // Parabolic refinement.
  for (int it = 0; it < 40; ++it) {
    const double h = best_omega * 0.002;
    const double sm = sse_at(best_omega - h, nullptr, nullptr);
    const double sp = sse_at(best_omega + h, nullptr, nullptr);
    const double s0 = best_sse;
    const double denom = sp - 2 * s0 + sm;
    if (denom <= 0) break;
    double step = -0.5 * h * (sp - sm) / denom;
    step = std::clamp(step, -10 * h, 10 * h);
    const double cand = best_omega + step;
    const double sc = sse_at(cand, nullptr, nullptr);
    if (sc < best_sse) {
      best_sse = sc;
      best_omega = cand;
    } else {
      break;
    }
  }

  RabiFit fit;
  double c0, c1;
  best_sse = sse_at(best_omega, &c0, &c1);
  const double s2 = best_sse / std::max(1, n - 3);
  if (std::abs(c1) < 3.0 * std::sqrt(s2))
    throw EstimationError("fit_rabi: flat data, fit underdetermined");
  fit.omega_mhz = best_omega;
  fit.offset = c0;
  fit.contrast = c1;

  // Visibility = swing of the fitted curve over the sampled range.
  double lo = 1.0, hi = 0.0;
  const double tmax = *std::max_element(t_us.begin(), t_us.end());
  for (int i = 0; i <= 2000; ++i) {
    const double t = tmax * i / 2000.0;
    const double y = c0 - c1 * rabi_population(t, best_omega, deltas_mhz, weights);
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  fit.visibility = hi - lo;

  // Uncertainties from the SSE curvature in omega and the linear block.
  const double h = std::max(1e-4, best_omega * 0.01);
  const double curv =
      (sse_at(best_omega + h, nullptr, nullptr) - 2 * best_sse + sse_at(best_omega - h, nullptr, nullptr)) /
      (h * h);
  fit.se_omega = curv > 0 ? std::sqrt(2.0 * s2 / curv) : 0.0;
  double s_gg = 0, s_g = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rabi_population(t_us[i], best_omega, deltas_mhz, weights);
    s_gg += g * g;
    s_g += g;
  }
  const double det = n * s_gg - s_g * s_g;
  const double var_c1 = det > 0 ? n * s2 / det : 0.0;
  // Visibility scales with c1 at fixed shape.
  fit.se_visibility = std::abs(c1) > 0 ? fit.visibility * std::sqrt(var_c1) / std::abs(c1) : 0.0;
  return fit;
}

double ks_exponential_pvalue(const std::vector<double>& samples, double mean) {
  const int n = static_cast<int>(samples.size());
  if (n < 2 || mean <= 0) return 0.0;
  std::vector<double> x = samples;
  std::sort(x.begin(), x.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = 1.0 - std::exp(-x[i] / mean);
    d = std::max(d, std::max(f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f));
  }
  const double sq = std::sqrt(static_cast<double>(n));
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  double q = 0.0;
  for (int j = 1; j <= 101; ++j)
    q += 2.0 * (j % 2 == 1 ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
  return std::clamp(q, 0.0, 1.0);
}

namespace {

struct DwellSide {
  double raw_mean = 0.0, mean = 0.0, se = 0.0;
  double p_ks = 0.0;
  long n = 0;
};

DwellSide dwell_side(const std::vector<int>& runs, double bin_us) {
  DwellSide s;
  s.n = static_cast<long>(runs.size());
  if (s.n == 0) return s;
  double kbar = 0.0, k2 = 0.0;
  std::vector<double> durations;
  durations.reserve(runs.size());
  for (int k : runs) {
    kbar += k;
    k2 += static_cast<double>(k) * k;
    durations.push_back(k * bin_us);
  }
  kbar /= s.n;
  const double var_k = std::max(0.0, k2 / s.n - kbar * kbar);
  s.raw_mean = kbar * bin_us;
  if (kbar > 1.0 + 1e-9) {
    // Geometric-sampling debias: observed runs are exponential dwells
    // quantised to whole bins.
    const double lambda = -std::log(1.0 - 1.0 / kbar) / bin_us;
    s.mean = 1.0 / lambda;
    const double dmdk = bin_us / (kbar * (kbar - 1.0)) / (lambda * bin_us) / (lambda * bin_us);
    s.se = std::abs(dmdk) * std::sqrt(var_k / s.n);
  } else {
    s.mean = s.raw_mean;
    s.se = bin_us * std::sqrt(var_k / s.n);
  }
  s.p_ks = ks_exponential_pvalue(durations, s.raw_mean);
  return s;
}

}  // namespace

DwellStats dwell_statistics(const std::vector<bool>& inferred_bright, double bin_us) {
  const auto [rb, rd] = segment_dwells(inferred_bright);
  if (rb.size() + rd.size() < 20)
    throw EstimationError("dwell_statistics: fewer than 20 uncensored dwells");
  DwellStats out;
  const auto b = dwell_side(rb, bin_us);
  const auto d = dwell_side(rd, bin_us);
  out.bright_mean_us = b.mean;
  out.bright_mean_se = b.se;
  out.bright_raw_mean_us = b.raw_mean;
  out.dark_mean_us = d.mean;
  out.dark_mean_se = d.se;
  out.dark_raw_mean_us = d.raw_mean;
  out.p_ks_bright = b.p_ks;
  out.p_ks_dark = d.p_ks;
  out.n_bright = b.n;
  out.n_dark = d.n;
  return out;
}

}  // namespace nvsim
