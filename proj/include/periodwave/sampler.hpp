#pragma once

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "periodwave/estimator.hpp"
#include "periodwave/flow.hpp"

namespace periodwave {

enum class OdeMethod { kEuler, kMidpoint, kRk4 };

OdeMethod parse_ode_method(const std::string& name);
std::string to_string(OdeMethod m);
// Field evaluations per step: 1, 2 and 4.
int evaluations_per_step(OdeMethod m);

struct SamplerConfig {
  OdeMethod method = OdeMethod::kMidpoint;
  int steps = 16;
  double temperature = 0.667;
  double noise_scale = 0.5;
  FreeUParams freeu;
  std::optional<std::array<int, 4>> per_band_steps;
  std::optional<std::array<double, 4>> per_band_temperature;
  PeriodMode period_mode = PeriodMode::kBatched;

  void validate() const;
};

class NonFiniteState : public std::runtime_error {
 public:
  NonFiniteState(const std::string& what, int step) : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

template <typename Scalar>
using VectorField = std::function<Vec<Scalar>(double t, const Vec<Scalar>& x)>;

// Fixed uniform grid from t = 0 to t = 1. Throws NonFiniteState carrying the
// 0-based index of the first step whose result is not finite.
template <typename Scalar>
Vec<Scalar> integrate(const VectorField<Scalar>& field, const Vec<Scalar>& x0, OdeMethod method, int steps);

template <typename Scalar>
Vec<Scalar> integrate(const VectorField<Scalar>& field, const Vec<Scalar>& x0, const SamplerConfig& cfg) {
  return integrate(field, x0, cfg.method, cfg.steps);
}

// Signal length a mel was computed from: the recorded sample count, or
// frames * hop when the mel carries none.
long long mel_signal_length(const MelSpec& mel);

// Runs the ODE from a given prior draw; x0 has the length of the output.
Waveform synthesize_from(const Estimator<float>& e, const MelSpec& mel, const Vec<float>& x0, const SamplerConfig& cfg);

Waveform synthesize(const Estimator<float>& e, const MelSpec& mel, const PriorTrack& prior, const SamplerConfig& cfg,
                    std::mt19937_64& rng);

// Generates bands 0..3 in order, each conditioned on the bands before it, and
// merges them with the inverse wavelet packet.
Waveform synthesize_mb(const std::array<const Estimator<float>*, 4>& bands, const MelSpec& mel,
                       const std::array<PriorTrack, 4>& priors, const SamplerConfig& cfg, std::mt19937_64& rng);

struct OdeBenchRow {
  OdeMethod method;
  int steps;
  double wall_ms;
  double mstft;
};

inline constexpr int kReferenceSteps = 256;

// Every (method, steps) rendering starts from the same prior draw and is
// scored against a 256-step midpoint rendering.
std::vector<OdeBenchRow> bench_ode(const Estimator<float>& e, const MelSpec& mel, const PriorTrack& prior,
                                   const std::vector<OdeMethod>& methods, const std::vector<int>& steps_list,
                                   const SamplerConfig& base, std::uint64_t seed);

void write_bench_ode_csv(const std::vector<OdeBenchRow>& rows, std::ostream& out);

}  // namespace periodwave
