#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "actrec/types.hpp"

namespace actrec {

enum class Waveform { sine, square, triangle };

Waveform waveform_from_string(const std::string& s);
std::string to_string(Waveform w);

struct SourceModel {
  std::string name;
  Waveform kind = Waveform::sine;
  double frequency = 0.0;        // Hz
  double amplitude = 1.0;
  double reference_phase = 0.0;  // radians, phase at activation start
};

/// Half-open activation interval [start, stop) in seconds with the indices of
/// the sources switched on.
struct Interval {
  double start = 0.0;
  double stop = 0.0;
  std::vector<int> active;
};

struct ActivationSchedule {
  std::vector<Interval> intervals;
  double duration = 0.0;     // total record length, seconds
  double noise_sigma = 0.0;  // additive white gaussian, whole record
  std::uint64_t seed = 0;
};

struct Scenario {
  double fs = 0.0;
  std::vector<SourceModel> sources;
  ActivationSchedule schedule;

  void validate() const;
  static Scenario from_json_text(const std::string& text);
  std::string to_json_text() const;
};

struct Composition {
  VecD signal;
  MatI truth;  // sources x samples, 1 where active
};

/// One waveform run at the given rate. The phase at sample 0 is
/// reference_phase + onset_phase.
VecD render_waveform(const SourceModel& src, double duration, double fs,
                     double onset_phase = 0.0);

/// Renders the full schedule. A source switched on in an interval restarts at
/// onset phase 0 unless it was active through the immediately preceding
/// sample, in which case its phase continues. Deterministic for a fixed seed.
Composition compose_sequence(const Scenario& scenario);

/// Deterministic standard normal draws (Box-Muller over mt19937_64); the
/// stdlib distribution is implementation-defined, this is not.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}
  double next();

 private:
  double uniform();
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace actrec
