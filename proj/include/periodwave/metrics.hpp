#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "periodwave/audio_io.hpp"

namespace periodwave {

struct StftResolution {
  int fft;
  int hop;
  int win;
};

struct MstftConfig {
  std::vector<StftResolution> resolutions{{1024, 120, 600}, {2048, 240, 1200}, {512, 50, 240}};
  double mag_floor = 1e-8;  // clamp on |X|^2 before the square root

  void validate() const;
};

// Mean over resolutions of spectral convergence plus mean absolute
// log-magnitude difference. `ref` is the normalizer of the convergence term.
double mstft_distance(const Waveform& ref, const Waveform& gen, const MstftConfig& cfg = {});

struct SpeedReport {
  double realtime_factor = 0.0;  // audio seconds per wall second
  double wall_ms_per_clip = 0.0;
  int reps = 0;
  double audio_seconds = 0.0;
  std::vector<double> wall_ms;  // every timed repetition
};

// One warmup call, then `reps` >= 3 timed calls; reports the median.
SpeedReport bench_speed(const std::function<Waveform()>& synth, int reps);

void write_speed_json(const SpeedReport& r, std::ostream& out);

}  // namespace periodwave
