#include "periodwave/sampler.hpp"

#include <atomic>
#include <chrono>
#include <iostream>
#include <ostream>

#include "periodwave/metrics.hpp"
#include "periodwave/wavelet.hpp"

namespace periodwave {

OdeMethod parse_ode_method(const std::string& name) {
  if (name == "euler") return OdeMethod::kEuler;
  if (name == "midpoint") return OdeMethod::kMidpoint;
  if (name == "rk4") return OdeMethod::kRk4;
  throw std::invalid_argument("unknown ODE method '" + name + "' (expected euler, midpoint or rk4)");
}

std::string to_string(OdeMethod m) {
  switch (m) {
    case OdeMethod::kEuler: return "euler";
    case OdeMethod::kMidpoint: return "midpoint";
    case OdeMethod::kRk4: return "rk4";
  }
  return "?";
}

int evaluations_per_step(OdeMethod m) {
  switch (m) {
    case OdeMethod::kEuler: return 1;
    case OdeMethod::kMidpoint: return 2;
    case OdeMethod::kRk4: return 4;
  }
  return 0;
}

void SamplerConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("SamplerConfig: steps must be >= 1");
  if (!(temperature >= 0.0)) throw std::invalid_argument("SamplerConfig: temperature must be >= 0");
  if (!(noise_scale > 0.0)) throw std::invalid_argument("SamplerConfig: noise_scale must be positive");
  if (per_band_steps) {
    for (int s : *per_band_steps) {
      if (s < 1) throw std::invalid_argument("SamplerConfig: per-band steps must all be >= 1");
    }
  }
  if (per_band_temperature) {
    for (double t : *per_band_temperature) {
      if (!(t >= 0.0)) throw std::invalid_argument("SamplerConfig: per-band temperatures must be >= 0");
    }
  }
  freeu.validate();
}

namespace {

void warn_rk4_once() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "warning: rk4 evaluates the vector field at t = 1, where learned fields are least reliable\n";
  }
}

}  // namespace

template <typename Scalar>
Vec<Scalar> integrate(const VectorField<Scalar>& field, const Vec<Scalar>& x0, OdeMethod method, int steps) {
  if (steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
  if (method == OdeMethod::kRk4) warn_rk4_once();
  const double h = 1.0 / steps;
  const Scalar hs = Scalar(h);
  Vec<Scalar> x = x0;
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    switch (method) {
      case OdeMethod::kEuler:
        x += hs * field(t, x);
        break;
      case OdeMethod::kMidpoint: {
        const Vec<Scalar> k1 = field(t, x);
        x += hs * field(t + 0.5 * h, x + Scalar(0.5) * hs * k1);
        break;
      }
      case OdeMethod::kRk4: {
        const Vec<Scalar> k1 = field(t, x);
        const Vec<Scalar> k2 = field(t + 0.5 * h, x + Scalar(0.5) * hs * k1);
        const Vec<Scalar> k3 = field(t + 0.5 * h, x + Scalar(0.5) * hs * k2);
        const Vec<Scalar> k4 = field(std::min(1.0, t + h), x + hs * k3);
        x += (hs / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
        break;
      }
    }
    if (!x.allFinite()) {
      throw NonFiniteState("integrate: non-finite state after step " + std::to_string(i) + " of " +
                               std::to_string(steps) + " (" + to_string(method) + ")",
                           i);
    }
  }
  return x;
}

template Vec<float> integrate<float>(const VectorField<float>&, const Vec<float>&, OdeMethod, int);
template Vec<double> integrate<double>(const VectorField<double>&, const Vec<double>&, OdeMethod, int);

long long mel_signal_length(const MelSpec& mel) {
  if (mel.num_samples) return *mel.num_samples;
  return static_cast<long long>(mel.frames()) * mel.config.hop_size;
}

namespace {

Waveform to_waveform(const Vec<float>& x, long long n, int rate) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.assign(x.data(), x.data() + n);
  return w;
}

Vec<float> draw_prior(const PriorTrack& prior, int hop, Index n, double alpha, double tau, std::mt19937_64& rng) {
  PriorSpec spec{prior_to_sample_std(prior, hop, n), alpha, tau};
  return sample_prior<float>(spec, n, rng);
}

}  // namespace

Waveform synthesize_from(const Estimator<float>& e, const MelSpec& mel, const Vec<float>& x0,
                         const SamplerConfig& cfg) {
  cfg.validate();
  if (e.config().multiband) throw std::invalid_argument("synthesize: multi-band estimator needs synthesize_mb");
  const long long n = mel_signal_length(mel);
  if (x0.size() != n) throw std::invalid_argument("synthesize: prior draw length does not match the mel");
  const CondFeatures<float> cond = e.mel_encode({&mel}, {Index(n)});
  const VectorField<float> field = [&](double t, const Vec<float>& x) {
    return e.estimate_vector_field(x.transpose(), t, cond, cfg.freeu, cfg.period_mode);
  };
  return to_waveform(integrate(field, x0, cfg), n, mel.config.sample_rate);
}

Waveform synthesize(const Estimator<float>& e, const MelSpec& mel, const PriorTrack& prior, const SamplerConfig& cfg,
                    std::mt19937_64& rng) {
  cfg.validate();
  const long long n = mel_signal_length(mel);
  if (Index(prior.frame_std.size()) != mel.frames()) {
    throw std::invalid_argument("synthesize: prior has " + std::to_string(prior.frame_std.size()) +
                                " frames, mel has " + std::to_string(mel.frames()));
  }
  const Vec<float> x0 = draw_prior(prior, mel.config.hop_size, n, cfg.noise_scale, cfg.temperature, rng);
  return synthesize_from(e, mel, x0, cfg);
}

Waveform synthesize_mb(const std::array<const Estimator<float>*, 4>& bands, const MelSpec& mel,
                       const std::array<PriorTrack, 4>& priors, const SamplerConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (!cfg.per_band_steps) throw std::invalid_argument("synthesize_mb: per-band steps are required");
  const long long n = mel_signal_length(mel);
  const long long padded = (n + 3) / 4 * 4;
  const Index len = Index(padded / 4);
  const int band_hop = mel.config.hop_size / 4;

  BandComponents<float> out;
  for (int b = 0; b < 4; ++b) {
    const Estimator<float>* e = bands[b];
    if (e == nullptr) throw std::invalid_argument("synthesize_mb: missing estimator for band " + std::to_string(b));
    if (!e->config().multiband || e->config().lower_bands != b) {
      throw std::invalid_argument("synthesize_mb: estimator " + std::to_string(b) + " is not the band-" +
                                  std::to_string(b) + " model");
    }
    if (Index(priors[b].frame_std.size()) != mel.frames()) {
      throw std::invalid_argument("synthesize_mb: band prior frame count does not match the mel");
    }
    const double tau = cfg.per_band_temperature ? (*cfg.per_band_temperature)[b] : cfg.temperature;
    const Vec<float> x0 = draw_prior(priors[b], band_hop, len, cfg.noise_scale, tau, rng);
    const CondFeatures<float> cond = e->mel_encode({&mel}, {len});

    Mat<float> input(1 + b, len);
    for (int k = 0; k < b; ++k) input.row(1 + k) = out.bands[k].transpose();
    const VectorField<float> field = [&](double t, const Vec<float>& x) {
      input.row(0) = x.transpose();
      return e->estimate_vector_field(input, t, cond, cfg.freeu, cfg.period_mode);
    };
    out.bands[b] = integrate(field, x0, cfg.method, (*cfg.per_band_steps)[b]);
    if (out.bands[b].size() != len) throw std::runtime_error("synthesize_mb: band length mismatch");
  }
  return to_waveform(packet_merge(out), n, mel.config.sample_rate);
}

std::vector<OdeBenchRow> bench_ode(const Estimator<float>& e, const MelSpec& mel, const PriorTrack& prior,
                                   const std::vector<OdeMethod>& methods, const std::vector<int>& steps_list,
                                   const SamplerConfig& base, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  std::mt19937_64 rng(seed);
  const long long n = mel_signal_length(mel);
  const Vec<float> x0 = draw_prior(prior, mel.config.hop_size, Index(n), base.noise_scale, base.temperature, rng);

  SamplerConfig ref_cfg = base;
  ref_cfg.method = OdeMethod::kMidpoint;
  ref_cfg.steps = kReferenceSteps;
  const Waveform reference = synthesize_from(e, mel, x0, ref_cfg);

  std::vector<OdeBenchRow> rows;
  for (OdeMethod m : methods) {
    for (int s : steps_list) {
      SamplerConfig c = base;
      c.method = m;
      c.steps = s;
      const auto t0 = clock::now();
      const Waveform w = synthesize_from(e, mel, x0, c);
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      rows.push_back({m, s, ms, mstft_distance(reference, w)});
    }
  }
  return rows;
}

void write_bench_ode_csv(const std::vector<OdeBenchRow>& rows, std::ostream& out) {
  out << "method,steps,wall_ms,mstft\n";
  for (const auto& r : rows) out << to_string(r.method) << ',' << r.steps << ',' << r.wall_ms << ',' << r.mstft << '\n';
}

}  // namespace periodwave
