#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "nvsim/markov.hpp"
#include "nvsim/rates.hpp"
#include "nvsim/register.hpp"
#include "nvsim/rng.hpp"

namespace nvsim {

// State path and photon record of one shot. Timestamps in us from the
// start of the trajectory, strictly increasing.
struct Trajectory {
  std::vector<double> emitted;
  std::vector<double> detected;
  std::vector<std::pair<double, RegisterState>> path;
  RegisterState final_state;
  int emitted_count = 0;
  int detected_count = 0;
};

enum class RecordLevel {
  CountsOnly,    // counts and final state only
  DetectedOnly,  // + detected timestamps
  Full,          // + emission timestamps and state path
};

// Gillespie walk over the optical channel set: exact exponential waiting
// times, no time-step discretisation. Each radiative decay is one optical
// cycle: it emits a photon, applies the electron spin-mixing branch, and
// flips each active nucleus with probability q_nuc. Detection thinning
// uses a sub-stream separate from the dynamics, so the emission record of
// a seed does not depend on eta.
class TrajectorySampler {
 public:
  TrajectorySampler(const RateModel& rates, const DriveSpec& drive, const HyperfineModel& hf,
                    const MwFlipRates& mw = {});

  // Evolves `state` in place for `duration` and returns the shot record.
  Trajectory run(RegisterState& state, double duration, Rng& rng,
                 RecordLevel level = RecordLevel::CountsOnly) const;

  const RateModel& rates() const { return rates_; }

 private:
  struct Channel {
    double rate;
    ElectronLevel dest;
    bool emits;
  };
  struct LevelChannels {
    double total = 0.0;
    std::vector<Channel> channels;
  };

  LevelChannels table_[kElectronLevels];       // charge_ok = true
  LevelChannels table_dark_[kElectronLevels];  // charge_ok = false: no optical excitation
  RateModel rates_;
  int n_active_ = 1;
};

Trajectory sample_trajectory(const RegisterState& state0, const DriveSpec& drive, double duration,
                             const RateModel& rates, const HyperfineModel& hf, Rng& rng,
                             RecordLevel level = RecordLevel::Full);

// Laser-off decay of any excited/singlet population back to the ground
// manifold (photons emitted here fall outside every counting gate).
void relax_to_ground(RegisterState& state, const RateModel& rates, const HyperfineModel& hf,
                     Rng& rng);

// Binomial thinning with efficiency eta plus homogeneous Poisson dark
// counts over [0, duration]; input sorted, output sorted.
std::vector<double> detect(const std::vector<double>& emissions, double eta, double dark_rate,
                           double duration, Rng& rng);

struct DecayCurve {
  std::vector<double> t_us;        // bin centres
  std::vector<double> rate_per_us; // averaged detected rate per bin
  long n_shots = 0;
};

DecayCurve fluorescence_decay_curve(const RegisterState& state0, const DriveSpec& drive,
                                    double duration, double bin_width, long n_shots,
                                    const RateModel& rates, const HyperfineModel& hf,
                                    std::uint64_t master_seed);

// Timestamp export. Both formats carry seconds; the binary framing is the
// 8-byte magic "NVSIMTS1", a little-endian u64 count, then count
// little-endian IEEE doubles.
void write_timestamps_text(std::ostream& out, const std::vector<double>& timestamps_us);
std::vector<double> read_timestamps_text(std::istream& in);
void write_timestamps_binary(std::ostream& out, const std::vector<double>& timestamps_us);
std::vector<double> read_timestamps_binary(std::istream& in);

}  // namespace nvsim
