#include "nvsim/markov.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nvsim/errors.hpp"

namespace nvsim {

double JumpProcess::max_exit_rate() const {
  std::vector<double> out(n_states, 0.0);
  for (const auto& c : channels) out[c.from] += c.rate;
  double m = 0.0;
  for (double r : out) m = std::max(m, r);
  return m;
}

namespace {

constexpr int kG0 = static_cast<int>(ElectronLevel::Ground0);
constexpr int kGm = static_cast<int>(ElectronLevel::GroundMinus);
constexpr int kGp = static_cast<int>(ElectronLevel::GroundPlus);
constexpr int kEx = static_cast<int>(ElectronLevel::ExcitedEx);
constexpr int kA1 = static_cast<int>(ElectronLevel::ExcitedA1);
constexpr int kSg = static_cast<int>(ElectronLevel::Singlet);

void add(JumpProcess& p, int from, int to, double rate, bool emits = false) {
  if (rate > 0.0) p.channels.push_back({from, to, rate, emits});
}

// Electron-level decay table: destinations and branching weights of the
// radiative channels (which carry the photon mark) and non-radiative ones.
struct ElectronChannels {
  struct Entry {
    int from, to;
    double rate;
    bool emits;
  };
  std::vector<Entry> entries;
};

ElectronChannels electron_channels(const RateModel& r, const DriveSpec& d, const MwFlipRates& mw) {
  ElectronChannels ch;
  auto put = [&](int f, int t, double rate, bool e) {
    if (rate > 0.0) ch.entries.push_back({f, t, rate, e});
  };
  if (d.ex) {
    put(kG0, kEx, r.excitation_ex(d.power_ex_nw), false);
    put(kGm, kG0, r.gamma_leak_dark, false);
    put(kGp, kG0, r.gamma_leak_dark, false);
  }
  if (d.a1) {
    put(kGm, kA1, r.excitation_a1(d.power_a1_nw), false);
    put(kGp, kA1, r.excitation_a1(d.power_a1_nw), false);
  }
  // Radiative decay; the spin-flip fraction lands in ms=+/-1 (Ex cycle)
  // or ms=0 (A1 cycle).
  put(kEx, kG0, r.gamma_rad * (1.0 - r.p_mix_ex), true);
  put(kEx, kGm, r.gamma_rad * r.p_mix_ex / 2.0, true);
  put(kEx, kGp, r.gamma_rad * r.p_mix_ex / 2.0, true);
  put(kEx, kSg, r.gamma_isc_ex, false);
  put(kA1, kGm, r.gamma_rad * (1.0 - r.p_mix_a1) / 2.0, true);
  put(kA1, kGp, r.gamma_rad * (1.0 - r.p_mix_a1) / 2.0, true);
  put(kA1, kG0, r.gamma_rad * r.p_mix_a1, true);
  put(kA1, kSg, r.gamma_isc_a1, false);
  put(kSg, kG0, r.gamma_singlet * r.beta0, false);
  put(kSg, kGm, r.gamma_singlet * (1.0 - r.beta0) / 2.0, false);
  put(kSg, kGp, r.gamma_singlet * (1.0 - r.beta0) / 2.0, false);
  put(kG0, kGm, mw.g0_gm, false);
  put(kGm, kG0, mw.gm_g0, false);
  put(kG0, kGp, mw.g0_gp, false);
  put(kGp, kG0, mw.gp_g0, false);
  return ch;
}

// Distribution of nuclear configurations after one optical cycle: each
// active nucleus independently flips with probability q (14N by one unit
// of mI, 13C by sign swap).
std::vector<std::pair<int, double>> cycle_nuclear_moves(const NuclearConfig& c, int n_active,
                                                        double q) {
  std::vector<std::pair<NuclearConfig, double>> dist = {{c, 1.0}};
  auto apply = [&](auto&& mover) {
    std::vector<std::pair<NuclearConfig, double>> next;
    for (const auto& [cfg, w] : dist) {
      for (const auto& [cfg2, w2] : mover(cfg)) next.push_back({cfg2, w * w2});
    }
    dist = std::move(next);
  };
  // 14N: mI = -1 -> 0, 0 -> -1 or +1, +1 -> 0.
  apply([&](const NuclearConfig& x) {
    std::vector<std::pair<NuclearConfig, double>> out = {{x, 1.0 - q}};
    if (x.mi14 == 0) {
      NuclearConfig a = x, b = x;
      a.mi14 = -1;
      b.mi14 = +1;
      out.push_back({a, q / 2});
      out.push_back({b, q / 2});
    } else {
      NuclearConfig a = x;
      a.mi14 = 0;
      out.push_back({a, q});
    }
    return out;
  });
  if (n_active >= 2)
    apply([&](const NuclearConfig& x) {
      NuclearConfig a = x;
      a.mc1_half = -x.mc1_half;
      return std::vector<std::pair<NuclearConfig, double>>{{x, 1.0 - q}, {a, q}};
    });
  if (n_active >= 3)
    apply([&](const NuclearConfig& x) {
      NuclearConfig a = x;
      a.mc2_half = -x.mc2_half;
      return std::vector<std::pair<NuclearConfig, double>>{{x, 1.0 - q}, {a, q}};
    });
  // Merge duplicates into config indices.
  std::vector<std::pair<int, double>> merged;
  for (const auto& [cfg, w] : dist) {
    int idx = NuclearConfig::index_of(cfg, n_active);
    bool found = false;
    for (auto& [i, acc] : merged)
      if (i == idx) {
        acc += w;
        found = true;
      }
    if (!found) merged.push_back({idx, w});
  }
  return merged;
}

}  // namespace

JumpProcess build_electron_process(const RateModel& rates, const DriveSpec& drive,
                                   const MwFlipRates& mw) {
  JumpProcess p;
  p.n_states = kElectronLevels;
  for (const auto& e : electron_channels(rates, drive, mw).entries)
    add(p, e.from, e.to, e.rate, e.emits);
  return p;
}

JumpProcess build_register_process(const RateModel& rates, const DriveSpec& drive,
                                   int n_active_nuclei, const MwFlipRates& mw) {
  const int ncfg = NuclearConfig::count(n_active_nuclei);
  JumpProcess p;
  p.n_states = kElectronLevels * ncfg;
  const auto ch = electron_channels(rates, drive, mw);
  const auto configs = NuclearConfig::enumerate(n_active_nuclei);
  for (int ci = 0; ci < ncfg; ++ci) {
    const auto moves = cycle_nuclear_moves(configs[ci], n_active_nuclei, rates.q_nuc);
    for (const auto& e : ch.entries) {
      if (e.emits && rates.q_nuc > 0.0) {
        for (const auto& [cj, w] : moves)
          add(p, e.from * ncfg + ci, e.to * ncfg + cj, e.rate * w, true);
      } else {
        add(p, e.from * ncfg + ci, e.to * ncfg + ci, e.rate, e.emits);
      }
    }
  }
  return p;
}

JumpProcess build_reduced_process(double detected_rate, double gamma_flip, double gamma_leak) {
  JumpProcess p;
  p.n_states = 2;
  add(p, 0, 0, detected_rate, true);
  add(p, 0, 1, gamma_flip, false);
  add(p, 1, 0, gamma_leak, false);
  return p;
}

namespace {

// Column-stochastic split of the uniformized step: A = non-detecting part,
// B = detecting part (emission thinned by eta, plus dark-count self-loops).
struct UniformizedStep {
  double lambda = 0.0;
  std::vector<double> stay;  // diagonal of A
  struct Hop {
    int from, to;
    double p_nodetect;
    double p_detect;
  };
  std::vector<Hop> hops;
  double dark_p = 0.0;  // diagonal of B

  void build(const JumpProcess& proc, double eta, double dark_rate) {
    std::vector<double> out(proc.n_states, 0.0);
    for (const auto& c : proc.channels) out[c.from] += c.rate;
    double mx = 0.0;
    for (double r : out) mx = std::max(mx, r);
    lambda = mx + dark_rate;
    if (lambda <= 0.0) return;
    stay.assign(proc.n_states, 0.0);
    for (int s = 0; s < proc.n_states; ++s) stay[s] = 1.0 - (out[s] + dark_rate) / lambda;
    dark_p = dark_rate / lambda;
    for (const auto& c : proc.channels) {
      const double p = c.rate / lambda;
      if (c.emits_photon)
        hops.push_back({c.from, c.to, p * (1.0 - eta), p * eta});
      else
        hops.push_back({c.from, c.to, p, 0.0});
    }
  }

  // next[c] = A * cur[c] + B * cur[c-1]; the overflow layer also absorbs
  // detections out of the last tracked layer and its own.
  void apply(const std::vector<std::vector<double>>& cur, std::vector<std::vector<double>>& next,
             int n_layers) const {
    const int n = static_cast<int>(stay.size());
    for (int c = 0; c < n_layers; ++c) {
      auto& dst = next[c];
      const auto& src = cur[c];
      for (int s = 0; s < n; ++s) dst[s] = stay[s] * src[s];
      if (dark_p > 0.0 && c > 0)
        for (int s = 0; s < n; ++s) dst[s] += dark_p * cur[c - 1][s];
      for (const auto& h : hops) {
        dst[h.to] += h.p_nodetect * src[h.from];
        if (h.p_detect > 0.0 && c > 0) dst[h.to] += h.p_detect * cur[c - 1][h.from];
      }
    }
    // Overflow layer (index n_layers): detections no longer advance it.
    auto& ov = next[n_layers];
    const auto& srcov = cur[n_layers];
    for (int s = 0; s < n; ++s) ov[s] = (stay[s] + dark_p) * srcov[s];
    if (dark_p > 0.0)
      for (int s = 0; s < n; ++s) ov[s] += dark_p * cur[n_layers - 1][s];
    for (const auto& h : hops) {
      ov[h.to] += (h.p_nodetect + h.p_detect) * srcov[h.from];
      if (h.p_detect > 0.0) ov[h.to] += h.p_detect * cur[n_layers - 1][h.from];
    }
  }
};

double log_poisson(double lt, int k) { return -lt + k * std::log(lt) - std::lgamma(k + 1.0); }

}  // namespace

CountingDistribution exact_counting(const JumpProcess& process, double eta, double dark_rate,
                                    const std::vector<double>& initial, double duration, int n_max,
                                    bool keep_joint) {
  if (static_cast<int>(initial.size()) != process.n_states)
    throw ConfigError("exact_counting: initial distribution size mismatch");
  if (n_max < 0) throw ConfigError("exact_counting: n_max must be >= 0");

  UniformizedStep step;
  step.build(process, eta, dark_rate);
  const int n = process.n_states;
  const int n_layers = n_max + 1;

  std::vector<std::vector<double>> cur(n_layers + 1, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> next = cur;
  std::vector<std::vector<double>> acc = cur;
  cur[0] = initial;

  const double lt = step.lambda * duration;
  if (lt > 4e6) throw ConfigError("exact_counting: rate*duration too large for uniformization");

  if (lt <= 0.0) {
    acc = cur;
  } else {
    const int k_max = static_cast<int>(lt + 10.0 * std::sqrt(lt) + 40.0);
    double covered = 0.0;
    for (int k = 0; k <= k_max; ++k) {
      if (k > 0) {
        step.apply(cur, next, n_layers);
        std::swap(cur, next);
      }
      const double w = std::exp(log_poisson(lt, k));
      if (w > 0.0) {
        covered += w;
        for (int c = 0; c <= n_layers; ++c)
          for (int s = 0; s < n; ++s) acc[c][s] += w * cur[c][s];
      }
      if (covered > 1.0 - 1e-13 && k > lt) break;
    }
  }

  CountingDistribution out;
  out.p.assign(n_layers, 0.0);
  for (int c = 0; c < n_layers; ++c)
    for (int s = 0; s < n; ++s) out.p[c] += acc[c][s];
  out.remainder = 0.0;
  for (int s = 0; s < n; ++s) out.remainder += acc[n_layers][s];
  if (keep_joint) out.joint = std::move(acc);
  return out;
}

std::vector<double> transient_distribution(const JumpProcess& process,
                                           const std::vector<double>& initial, double t) {
  // eta = 0 folds every mark into the non-detecting part; a single tracked
  // layer then carries the full transient.
  auto d = exact_counting(process, 0.0, 0.0, initial, t, 0, true);
  return d.joint[0];
}

double detected_rate(const JumpProcess& process, double eta, double dark_rate,
                     const std::vector<double>& pop) {
  double rate = dark_rate;
  for (const auto& c : process.channels)
    if (c.emits_photon) rate += eta * c.rate * pop[c.from];
  return rate;
}

std::vector<double> detected_rate_curve(const JumpProcess& process, double eta, double dark_rate,
                                        const std::vector<double>& initial, double bin_us,
                                        int n_bins) {
  std::vector<double> out;
  out.reserve(n_bins);
  std::vector<double> pop = initial;
  // Evaluate at bin centres by advancing half a bin, then whole bins.
  pop = transient_distribution(process, pop, bin_us / 2.0);
  out.push_back(detected_rate(process, eta, dark_rate, pop));
  for (int i = 1; i < n_bins; ++i) {
    pop = transient_distribution(process, pop, bin_us);
    out.push_back(detected_rate(process, eta, dark_rate, pop));
  }
  return out;
}

std::vector<double> delta_distribution(int n_states, int state) {
  std::vector<double> v(n_states, 0.0);
  v.at(state) = 1.0;
  return v;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::max(a.size(), b.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = i < a.size() ? a[i] : 0.0;
    const double y = i < b.size() ? b[i] : 0.0;
    tv += std::abs(x - y);
  }
  return tv / 2.0;
}

}  // namespace nvsim
