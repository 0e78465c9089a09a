#include "nvsim/trajectory.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <ostream>

#include "nvsim/errors.hpp"

namespace nvsim {

namespace {

constexpr double kUsToSeconds = 1e-6;

void flip_nuclei(NuclearConfig& n, int n_active, double q, Rng& rng) {
  if (q <= 0.0) return;
  if (rng.bernoulli(q)) {
    if (n.mi14 == 0)
      n.mi14 = rng.bernoulli(0.5) ? -1 : +1;
    else
      n.mi14 = 0;
  }
  if (n_active >= 2 && rng.bernoulli(q)) n.mc1_half = -n.mc1_half;
  if (n_active >= 3 && rng.bernoulli(q)) n.mc2_half = -n.mc2_half;
}

}  // namespace

TrajectorySampler::TrajectorySampler(const RateModel& rates, const DriveSpec& drive,
                                     const HyperfineModel& hf, const MwFlipRates& mw)
    : rates_(rates), n_active_(hf.n_active_nuclei) {
  const auto lit = build_electron_process(rates, drive, mw);
  for (const auto& c : lit.channels) {
    table_[c.from].channels.push_back(
        {c.rate, static_cast<ElectronLevel>(c.to), c.emits_photon});
    table_[c.from].total += c.rate;
  }
  const auto dark = build_electron_process(rates, DriveSpec::none(), mw);
  for (const auto& c : dark.channels) {
    table_dark_[c.from].channels.push_back(
        {c.rate, static_cast<ElectronLevel>(c.to), c.emits_photon});
    table_dark_[c.from].total += c.rate;
  }
}

Trajectory TrajectorySampler::run(RegisterState& state, double duration, Rng& rng,
                                  RecordLevel level) const {
  if (duration < 0.0) throw ConfigError("trajectory duration must be >= 0");
  // One seed draw per call keeps repeated calls on the same shot stream
  // independent; the detection sub-stream never touches the dynamics one.
  const std::uint64_t sub = rng.next_u64();
  Rng dyn(Rng::mix(sub, 1));
  Rng det(Rng::mix(sub, 2));

  Trajectory out;
  const LevelChannels* table = state.charge_ok ? table_ : table_dark_;
  double t = 0.0;
  while (true) {
    const auto& lc = table[static_cast<int>(state.electron)];
    if (lc.total <= 0.0) break;  // dark state: hold until the end
    t += dyn.exponential(lc.total);
    if (t >= duration) break;
    double u = dyn.uniform() * lc.total;
    const Channel* chosen = &lc.channels.back();
    for (const auto& c : lc.channels) {
      if (u < c.rate) {
        chosen = &c;
        break;
      }
      u -= c.rate;
    }
    state.electron = chosen->dest;
    if (chosen->emits) {
      ++out.emitted_count;
      flip_nuclei(state.nuclei, n_active_, rates_.q_nuc, dyn);
      if (level == RecordLevel::Full) out.emitted.push_back(t);
      if (det.bernoulli(rates_.eta)) {
        ++out.detected_count;
        if (level != RecordLevel::CountsOnly) out.detected.push_back(t);
      }
    }
    if (level == RecordLevel::Full) out.path.push_back({t, state});
  }

  if (rates_.dark_rate > 0.0) {
    const auto n_dark = det.poisson(rates_.dark_rate * duration);
    for (std::uint32_t i = 0; i < n_dark; ++i) {
      const double td = det.uniform() * duration;
      ++out.detected_count;
      if (level != RecordLevel::CountsOnly) out.detected.push_back(td);
    }
    if (level != RecordLevel::CountsOnly)
      std::sort(out.detected.begin(), out.detected.end());
  }

  out.final_state = state;
  return out;
}

Trajectory sample_trajectory(const RegisterState& state0, const DriveSpec& drive, double duration,
                             const RateModel& rates, const HyperfineModel& hf, Rng& rng,
                             RecordLevel level) {
  TrajectorySampler sampler(rates, drive, hf);
  RegisterState state = state0;
  return sampler.run(state, duration, rng, level);
}

void relax_to_ground(RegisterState& state, const RateModel& rates, const HyperfineModel& hf,
                     Rng& rng) {
  if (is_ground(state.electron)) return;
  TrajectorySampler sampler(rates, DriveSpec::none(), hf);
  // The laser-off process has no cycles; a handful of jumps reaches ground.
  while (!is_ground(state.electron)) sampler.run(state, 1e6, rng, RecordLevel::CountsOnly);
}

std::vector<double> detect(const std::vector<double>& emissions, double eta, double dark_rate,
                           double duration, Rng& rng) {
  std::vector<double> out;
  for (double t : emissions)
    if (rng.bernoulli(eta)) out.push_back(t);
  if (dark_rate > 0.0) {
    const auto n_dark = rng.poisson(dark_rate * duration);
    for (std::uint32_t i = 0; i < n_dark; ++i) out.push_back(rng.uniform() * duration);
    std::sort(out.begin(), out.end());
  }
  return out;
}

DecayCurve fluorescence_decay_curve(const RegisterState& state0, const DriveSpec& drive,
                                    double duration, double bin_width, long n_shots,
                                    const RateModel& rates, const HyperfineModel& hf,
                                    std::uint64_t master_seed) {
  if (n_shots < 1) throw ConfigError("decay curve needs n_shots >= 1");
  const int n_bins = static_cast<int>(duration / bin_width);
  std::vector<long> counts(n_bins, 0);
  TrajectorySampler sampler(rates, drive, hf);
  for (long shot = 0; shot < n_shots; ++shot) {
    Rng rng = Rng::stream(master_seed, static_cast<std::uint64_t>(shot));
    RegisterState state = state0;
    const auto traj = sampler.run(state, duration, rng, RecordLevel::DetectedOnly);
    for (double t : traj.detected) {
      const int b = static_cast<int>(t / bin_width);
      if (b >= 0 && b < n_bins) ++counts[b];
    }
  }
  DecayCurve curve;
  curve.n_shots = n_shots;
  for (int b = 0; b < n_bins; ++b) {
    curve.t_us.push_back((b + 0.5) * bin_width);
    curve.rate_per_us.push_back(static_cast<double>(counts[b]) /
                                (static_cast<double>(n_shots) * bin_width));
  }
  return curve;
}

void write_timestamps_text(std::ostream& out, const std::vector<double>& timestamps_us) {
  out.precision(12);
  for (double t : timestamps_us) out << t * kUsToSeconds << "\n";
}

std::vector<double> read_timestamps_text(std::istream& in) {
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v / kUsToSeconds);
  return out;
}

namespace {
constexpr char kTimestampMagic[8] = {'N', 'V', 'S', 'I', 'M', 'T', 'S', '1'};
}

void write_timestamps_binary(std::ostream& out, const std::vector<double>& timestamps_us) {
  out.write(kTimestampMagic, 8);
  const std::uint64_t n = timestamps_us.size();
  out.write(reinterpret_cast<const char*>(&n), 8);
  for (double t : timestamps_us) {
    const double s = t * kUsToSeconds;
    out.write(reinterpret_cast<const char*>(&s), 8);
  }
}

std::vector<double> read_timestamps_binary(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kTimestampMagic, 8) != 0)
    throw ConfigError("bad timestamp file magic");
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), 8);
  std::vector<double> out(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    double s;
    in.read(reinterpret_cast<char*>(&s), 8);
    if (!in) throw ConfigError("truncated timestamp file");
    out[i] = s / kUsToSeconds;
  }
  return out;
}

}  // namespace nvsim
