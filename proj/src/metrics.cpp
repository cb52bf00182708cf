#include "periodwave/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "periodwave/spectral.hpp"

namespace periodwave {

void MstftConfig::validate() const {
  if (resolutions.empty()) throw std::invalid_argument("MstftConfig: no resolutions");
  for (const auto& r : resolutions) {
    if (r.fft <= 0 || r.hop <= 0 || r.win <= 0 || r.win > r.fft) {
      throw std::invalid_argument("MstftConfig: resolution needs 0 < win <= fft and hop > 0");
    }
  }
  if (!(mag_floor > 0.0)) throw std::invalid_argument("MstftConfig: mag_floor must be positive");
}

double mstft_distance(const Waveform& ref, const Waveform& gen, const MstftConfig& cfg) {
  cfg.validate();
  if (ref.size() != gen.size()) {
    throw std::invalid_argument("mstft_distance: length mismatch (" + std::to_string(ref.size()) + " vs " +
                                std::to_string(gen.size()) + ")");
  }
  if (ref.sample_rate != gen.sample_rate) throw std::invalid_argument("mstft_distance: sample rate mismatch");
  const double floor_mag = std::sqrt(cfg.mag_floor);
  double total = 0.0;
  for (const auto& r : cfg.resolutions) {
    const Eigen::Index frames = 1 + Eigen::Index(ref.size()) / r.hop;
    const Eigen::ArrayXXd y = stft_magnitude(ref.samples, r.fft, r.hop, r.win, frames).array().max(floor_mag);
    const Eigen::ArrayXXd x = stft_magnitude(gen.samples, r.fft, r.hop, r.win, frames).array().max(floor_mag);
    const double sc = std::sqrt((y - x).square().sum()) / std::sqrt(y.square().sum());
    const double log_mag = (y.log() - x.log()).abs().mean();
    total += sc + log_mag;
  }
  return total / double(cfg.resolutions.size());
}

SpeedReport bench_speed(const std::function<Waveform()>& synth, int reps) {
  if (reps < 3) throw std::invalid_argument("bench_speed: reps must be >= 3");
  using clock = std::chrono::steady_clock;
  const Waveform warm = synth();
  SpeedReport r;
  r.reps = reps;
  r.audio_seconds = warm.duration_seconds();
  for (int i = 0; i < reps; ++i) {
    const auto t0 = clock::now();
    const Waveform w = synth();
    r.wall_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  }
  std::vector<double> sorted = r.wall_ms;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  r.wall_ms_per_clip = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  const double wall_s = std::max(r.wall_ms_per_clip, 1e-6) / 1000.0;
  r.realtime_factor = r.audio_seconds / wall_s;
  return r;
}

void write_speed_json(const SpeedReport& r, std::ostream& out) {
  nlohmann::json j;
  j["realtime_factor"] = r.realtime_factor;
  j["wall_ms_per_clip"] = r.wall_ms_per_clip;
  j["reps"] = r.reps;
  j["audio_seconds"] = r.audio_seconds;
  j["wall_ms"] = r.wall_ms;
  out << j.dump(2) << '\n';
}

}  // namespace periodwave
