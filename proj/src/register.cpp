#include "nvsim/register.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nvsim/errors.hpp"

namespace nvsim {

std::string to_string(ElectronLevel e) {
  switch (e) {
    case ElectronLevel::Ground0: return "ms0";
    case ElectronLevel::GroundMinus: return "ms-1";
    case ElectronLevel::GroundPlus: return "ms+1";
    case ElectronLevel::ExcitedEx: return "Ex";
    case ElectronLevel::ExcitedA1: return "A1";
    case ElectronLevel::Singlet: return "singlet";
  }
  return "?";
}

namespace {

void check_active(int n_active) {
  if (n_active < 1 || n_active > 3)
    throw ConfigError("active nucleus count must be 1, 2 or 3, got " + std::to_string(n_active));
}

}  // namespace

int NuclearConfig::count(int n_active) {
  check_active(n_active);
  return 3 * (n_active >= 2 ? 2 : 1) * (n_active >= 3 ? 2 : 1);
}

std::vector<NuclearConfig> NuclearConfig::enumerate(int n_active) {
  check_active(n_active);
  std::vector<NuclearConfig> out;
  out.reserve(count(n_active));
  for (int mi = -1; mi <= 1; ++mi) {
    if (n_active == 1) {
      out.push_back({mi, 0, 0});
      continue;
    }
    for (int c1 = -1; c1 <= 1; c1 += 2) {
      if (n_active == 2) {
        out.push_back({mi, c1, 0});
        continue;
      }
      for (int c2 = -1; c2 <= 1; c2 += 2) out.push_back({mi, c1, c2});
    }
  }
  return out;
}

int NuclearConfig::index_of(const NuclearConfig& c, int n_active) {
  check_active(n_active);
  if (c.mi14 < -1 || c.mi14 > 1) throw ConfigError("invalid mI14 value");
  int idx = c.mi14 + 1;
  if (n_active >= 2) {
    if (c.mc1_half != -1 && c.mc1_half != 1) throw ConfigError("invalid mC1 value");
    idx = idx * 2 + (c.mc1_half + 1) / 2;
  }
  if (n_active >= 3) {
    if (c.mc2_half != -1 && c.mc2_half != 1) throw ConfigError("invalid mC2 value");
    idx = idx * 2 + (c.mc2_half + 1) / 2;
  }
  return idx;
}

NuclearConfig NuclearConfig::from_index(int index, int n_active) {
  check_active(n_active);
  if (index < 0 || index >= count(n_active)) throw ConfigError("nuclear config index out of range");
  NuclearConfig c;
  if (n_active >= 3) {
    c.mc2_half = (index % 2) * 2 - 1;
    index /= 2;
  }
  if (n_active >= 2) {
    c.mc1_half = (index % 2) * 2 - 1;
    index /= 2;
  }
  c.mi14 = index - 1;
  return c;
}

std::string NuclearConfig::to_string() const {
  std::ostringstream s;
  s << "(" << (mi14 > 0 ? "+" : "") << mi14;
  auto half = [&](int h) {
    if (h == 0)
      s << ",.";
    else
      s << "," << (h > 0 ? "+1/2" : "-1/2");
  };
  half(mc1_half);
  half(mc2_half);
  s << ")";
  return s.str();
}

void HyperfineModel::validate() const {
  if (f0_mhz <= 0) throw ConfigError("f0 must be positive");
  if (a14_mhz <= 0 || ac1_mhz <= 0 || ac2_mhz <= 0)
    throw ConfigError("hyperfine splittings must be strictly positive");
  if (zeeman_mhz < 0) throw ConfigError("zeeman splitting must be non-negative");
  if (linewidth_mhz <= 0) throw ConfigError("linewidth must be positive");
  check_active(n_active_nuclei);
}

double HyperfineModel::offset_mhz(const NuclearConfig& c) const {
  double off = -a14_mhz * c.mi14;
  off += ac1_mhz * 0.5 * c.mc1_half;
  off += ac2_mhz * 0.5 * c.mc2_half;
  return off;
}

double HyperfineModel::line_frequency_mhz(const NuclearConfig& c, int branch) const {
  if (branch != -1 && branch != 1) throw ConfigError("branch must be -1 or +1");
  return f0_mhz + branch * (zeeman_mhz / 2.0 + offset_mhz(c));
}

HyperfineModel HyperfineModel::from_config(const KeyValueConfig& cfg) {
  HyperfineModel m;
  m.f0_mhz = cfg.get_double("hf.f0_mhz", m.f0_mhz);
  m.zeeman_mhz = cfg.get_double("hf.zeeman_mhz", m.zeeman_mhz);
  m.a14_mhz = cfg.get_double("hf.a14_mhz", m.a14_mhz);
  m.ac1_mhz = cfg.get_double("hf.ac1_mhz", m.ac1_mhz);
  m.ac2_mhz = cfg.get_double("hf.ac2_mhz", m.ac2_mhz);
  m.rf_nuclear_mhz = cfg.get_double("hf.rf_nuclear_mhz", m.rf_nuclear_mhz);
  m.linewidth_mhz = cfg.get_double("hf.linewidth_mhz", m.linewidth_mhz);
  m.rf_manifold_ms = static_cast<int>(cfg.get_int("hf.rf_manifold_ms", m.rf_manifold_ms));
  m.n_active_nuclei = static_cast<int>(cfg.get_int("hf.active_nuclei", m.n_active_nuclei));
  m.validate();
  return m;
}

void HyperfineModel::to_config(KeyValueConfig& cfg) const {
  cfg.set_double("hf.f0_mhz", f0_mhz);
  cfg.set_double("hf.zeeman_mhz", zeeman_mhz);
  cfg.set_double("hf.a14_mhz", a14_mhz);
  cfg.set_double("hf.ac1_mhz", ac1_mhz);
  cfg.set_double("hf.ac2_mhz", ac2_mhz);
  cfg.set_double("hf.rf_nuclear_mhz", rf_nuclear_mhz);
  cfg.set_double("hf.linewidth_mhz", linewidth_mhz);
  cfg.set_int("hf.rf_manifold_ms", rf_manifold_ms);
  cfg.set_int("hf.active_nuclei", n_active_nuclei);
}

std::vector<HyperfineLine> enumerate_hyperfine_lines(const HyperfineModel& model,
                                                     int n_active_nuclei) {
  check_active(n_active_nuclei);
  std::vector<HyperfineLine> lines;
  for (const auto& c : NuclearConfig::enumerate(n_active_nuclei)) {
    for (int branch : {-1, +1}) {
      lines.push_back({model.line_frequency_mhz(c, branch), branch, c});
    }
  }
  std::sort(lines.begin(), lines.end(), [](const HyperfineLine& a, const HyperfineLine& b) {
    if (a.frequency_mhz != b.frequency_mhz) return a.frequency_mhz < b.frequency_mhz;
    if (a.branch != b.branch) return a.branch < b.branch;
    return NuclearConfig::index_of(a.config, 3) < NuclearConfig::index_of(b.config, 3);
  });
  return lines;
}

double line_for_config(const HyperfineModel& model, const NuclearConfig& config, int branch) {
  return model.line_frequency_mhz(config, branch);
}

HyperfineLine config_for_frequency(const HyperfineModel& model, double frequency_mhz,
                                   int n_active_nuclei) {
  const auto lines = enumerate_hyperfine_lines(model, n_active_nuclei);
  const double tol = model.linewidth_mhz / 10.0;
  const HyperfineLine* best = nullptr;
  double best_dist = 0.0;
  for (const auto& l : lines) {
    double d = std::abs(l.frequency_mhz - frequency_mhz);
    if (!best || d < best_dist) {
      best = &l;
      best_dist = d;
    }
  }
  std::vector<const HyperfineLine*> matches;
  for (const auto& l : lines)
    if (std::abs(l.frequency_mhz - best->frequency_mhz) < tol) matches.push_back(&l);
  if (matches.size() > 1) {
    std::ostringstream msg;
    msg << "line at " << best->frequency_mhz << " MHz is degenerate; matching configs:";
    for (const auto* m : matches)
      msg << " branch " << (m->branch > 0 ? "+1" : "-1") << " " << m->config.to_string();
    throw AmbiguityError(msg.str());
  }
  return *best;
}

std::vector<RegisterState> state_space(int n_active_nuclei) {
  check_active(n_active_nuclei);
  std::vector<RegisterState> out;
  const ElectronLevel order[3] = {ElectronLevel::Ground0, ElectronLevel::GroundMinus,
                                  ElectronLevel::GroundPlus};
  for (const auto e : order)
    for (const auto& c : NuclearConfig::enumerate(n_active_nuclei))
      out.push_back({e, c, true});
  return out;
}

int state_index(const RegisterState& s, int n_active_nuclei) {
  int e;
  switch (s.electron) {
    case ElectronLevel::Ground0: e = 0; break;
    case ElectronLevel::GroundMinus: e = 1; break;
    case ElectronLevel::GroundPlus: e = 2; break;
    default: throw ConfigError("state_space covers ground manifolds only");
  }
  return e * NuclearConfig::count(n_active_nuclei) +
         NuclearConfig::index_of(s.nuclei, n_active_nuclei);
}

}  // namespace nvsim
