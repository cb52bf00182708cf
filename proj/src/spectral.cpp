#include "periodwave/spectral.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <stdexcept>

#include "periodwave/padding.hpp"

namespace periodwave {

namespace {

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz >= min_log_hz ? min_log_mel + std::log(hz / min_log_hz) / logstep : hz / f_sp;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel >= min_log_mel ? min_log_hz * std::exp(logstep * (mel - min_log_mel)) : f_sp * mel;
}

}  // namespace

void MelConfig::validate() const {
  if (fft_size <= 0 || hop_size <= 0 || win_size <= 0 || n_mels <= 0 || sample_rate <= 0) {
    throw std::invalid_argument("MelConfig: sizes and rate must be positive");
  }
  if (win_size > fft_size) throw std::invalid_argument("MelConfig: win_size > fft_size");
  if (hop_size > win_size) throw std::invalid_argument("MelConfig: hop_size > win_size");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    throw std::invalid_argument("MelConfig: need 0 <= fmin < fmax <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw std::invalid_argument("MelConfig: log_floor must be positive");
}

EnergyBand full_band_energy() { return {0, 100, 0.031622782, 9.124346}; }

EnergyBand band_energy(int band) {
  switch (band) {
    case 0: return {0, 61, 0.024698181, 8.756637};
    case 1: return {60, 81, 0.014491379, 4.242267};
    case 2: return {80, 93, 0.011401756, 3.1011465};
    case 3: return {91, 100, 0.031622782, 2.3407087};
    default: throw std::out_of_range("band_energy: band must be in [0, 4)");
  }
}

std::vector<double> hann_window(int win, int fft) {
  std::vector<double> w(fft, 0.0);
  const int left = (fft - win) / 2;
  for (int n = 0; n < win; ++n) {
    w[left + n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / win);
  }
  return w;
}

Eigen::MatrixXd stft_magnitude(const std::vector<float>& x, int fft, int hop, int win, Eigen::Index n_frames) {
  const long long n = static_cast<long long>(x.size());
  const int pad = fft / 2;
  if (n <= pad) throw std::invalid_argument("stft_magnitude: signal shorter than half an FFT frame");
  const std::vector<double> window = hann_window(win, fft);
  const int bins = fft / 2 + 1;
  Eigen::MatrixXd mag(n_frames, bins);
  Eigen::FFT<double> engine;
  engine.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(fft);
  std::vector<std::complex<double>> spec;
  for (Eigen::Index k = 0; k < n_frames; ++k) {
    const long long start = k * hop - pad;
    for (int i = 0; i < fft; ++i) frame[i] = window[i] * x[reflect_index(start + i, n)];
    engine.fwd(spec, frame);
    for (int b = 0; b < bins; ++b) mag(k, b) = std::abs(spec[b]);
  }
  return mag;
}

Eigen::MatrixXd mel_filterbank(const MelConfig& cfg) {
  const int bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);
  std::vector<double> mel_f(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i) mel_f[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lower_w = mel_f[m + 1] - mel_f[m];
    const double upper_w = mel_f[m + 2] - mel_f[m + 1];
    const double enorm = 2.0 / (mel_f[m + 2] - mel_f[m]);
    for (int b = 0; b < bins; ++b) {
      const double f = double(b) * cfg.sample_rate / cfg.fft_size;
      const double lower = (f - mel_f[m]) / lower_w;
      const double upper = (mel_f[m + 2] - f) / upper_w;
      fb(m, b) = std::max(0.0, std::min(lower, upper)) * enorm;
    }
  }
  return fb;
}

Eigen::Index mel_frames(long long num_samples, int hop) { return (num_samples + hop - 1) / hop; }

MelSpec mel_spectrogram(const Waveform& w, const MelConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate) {
    throw std::invalid_argument("mel_spectrogram: waveform rate " + std::to_string(w.sample_rate) +
                                " != config rate " + std::to_string(cfg.sample_rate));
  }
  if (static_cast<long long>(w.samples.size()) < cfg.win_size) {
    throw std::invalid_argument("mel_spectrogram: signal shorter than one window");
  }
  const Eigen::Index frames = mel_frames(static_cast<long long>(w.samples.size()), cfg.hop_size);
  const Eigen::MatrixXd mag = stft_magnitude(w.samples, cfg.fft_size, cfg.hop_size, cfg.win_size, frames);
  const Eigen::MatrixXd mel = mag * mel_filterbank(cfg).transpose();

  MelSpec out;
  out.config = cfg;
  out.num_samples = static_cast<long long>(w.samples.size());
  out.values = mel.array().max(cfg.log_floor).log().cast<float>();
  return out;
}

PriorTrack energy_prior(const MelSpec& mel, int lo, int hi, double e_min, double e_max, double std_floor) {
  if (!(0 <= lo && lo < hi && hi <= mel.bins())) throw std::invalid_argument("energy_prior: need 0 <= lo < hi <= n_mels");
  if (!(e_max > e_min)) throw std::invalid_argument("energy_prior: e_max must exceed e_min");
  PriorTrack p;
  p.energy_min = e_min;
  p.energy_max = e_max;
  p.frame_std.resize(mel.frames());
  for (Eigen::Index f = 0; f < mel.frames(); ++f) {
    const double energy = mel.values.row(f).segment(lo, hi - lo).cast<double>().array().exp().mean();
    const double norm = (energy - e_min) / (e_max - e_min);
    p.frame_std[f] = static_cast<float>(std::clamp(norm, std_floor, 1.0));
  }
  return p;
}

PriorTrack energy_prior(const MelSpec& mel, const EnergyBand& band, int band_id, double std_floor) {
  PriorTrack p = energy_prior(mel, band.lo, band.hi, band.e_min, band.e_max, std_floor);
  p.band_id = band_id;
  return p;
}

std::vector<float> prior_to_sample_std(const PriorTrack& p, int hop, long long target_len) {
  if (p.frame_std.empty()) throw std::invalid_argument("prior_to_sample_std: empty prior track");
  if (hop <= 0) throw std::invalid_argument("prior_to_sample_std: hop must be positive");
  const long long available = static_cast<long long>(p.frame_std.size()) * hop;
  if (target_len < 0 || target_len > available) {
    throw std::invalid_argument("prior_to_sample_std: target length " + std::to_string(target_len) +
                                " exceeds frames * hop = " + std::to_string(available));
  }
  std::vector<float> out(static_cast<std::size_t>(target_len));
  for (long long i = 0; i < target_len; ++i) out[i] = p.frame_std[i / hop];
  return out;
}

void save_mel(const MelSpec& mel, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_mel: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(mel.values.data()),
              static_cast<std::streamsize>(mel.values.size() * sizeof(float)));
  }
  const auto& c = mel.config;
  nlohmann::json side = {
      {"frames", mel.frames()},
      {"n_mels", mel.bins()},
      {"dtype", "float32"},
      {"order", "frame-major"},
      {"config",
       {{"fft_size", c.fft_size},
        {"hop_size", c.hop_size},
        {"win_size", c.win_size},
        {"n_mels", c.n_mels},
        {"fmin", c.fmin},
        {"fmax", c.fmax},
        {"sample_rate", c.sample_rate},
        {"log_floor", c.log_floor}}},
  };
  if (mel.num_samples) side["num_samples"] = *mel.num_samples;
  std::ofstream js(path.string() + ".json");
  js << side.dump(2) << "\n";
}

MelSpec load_mel(const std::filesystem::path& path) {
  std::ifstream js(path.string() + ".json");
  if (!js) throw std::runtime_error("load_mel: missing sidecar " + path.string() + ".json");
  const nlohmann::json side = nlohmann::json::parse(js);
  MelSpec mel;
  const auto& c = side.at("config");
  mel.config.fft_size = c.at("fft_size");
  mel.config.hop_size = c.at("hop_size");
  mel.config.win_size = c.at("win_size");
  mel.config.n_mels = c.at("n_mels");
  mel.config.fmin = c.at("fmin");
  mel.config.fmax = c.at("fmax");
  mel.config.sample_rate = c.at("sample_rate");
  mel.config.log_floor = c.at("log_floor");
  if (side.contains("num_samples")) mel.num_samples = side.at("num_samples").get<long long>();
  const Eigen::Index frames = side.at("frames");
  const Eigen::Index bins = side.at("n_mels");
  mel.values.resize(frames, bins);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_mel: cannot open " + path.string());
  in.read(reinterpret_cast<char*>(mel.values.data()), static_cast<std::streamsize>(mel.values.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(mel.values.size() * sizeof(float))) {
    throw std::runtime_error("load_mel: truncated data in " + path.string());
  }
  return mel;
}

}  // namespace periodwave
