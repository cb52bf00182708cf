#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <vector>

#include "periodwave/audio_io.hpp"

namespace periodwave {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MelConfig {
  int fft_size = 1024;
  int hop_size = 256;
  int win_size = 1024;
  int n_mels = 100;
  double fmin = 0.0;
  double fmax = 12000.0;
  int sample_rate = 24000;
  double log_floor = 1e-5;

  void validate() const;
};

/// Log-mel spectrogram, one row per frame.
struct MelSpec {
  RowMatrixXf values;  // frames x n_mels
  MelConfig config;
  std::optional<long long> num_samples;  // length of the source signal when known

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index bins() const { return values.cols(); }
};

/// Per-frame standard deviation of the data-dependent prior.
struct PriorTrack {
  std::vector<float> frame_std;
  int band_id = 0;  // 0 = full band, 1..4 = wavelet bands
  double energy_min = 0.0;
  double energy_max = 1.0;
};

// Mel band range and dataset energy bounds used to normalize a prior.
struct EnergyBand {
  int lo = 0;
  int hi = 100;
  double e_min = 0.031622782;
  double e_max = 9.124346;
};

inline constexpr double kDefaultStdFloor = 0.1;

EnergyBand full_band_energy();
// Bands 0..3 of the multi-band model, low to high frequency.
EnergyBand band_energy(int band);

// Hann window (periodic) of length `win`, zero-padded and centred in `fft`.
std::vector<double> hann_window(int win, int fft);

// Magnitude STFT after reflect-padding fft/2 on both sides; frame k starts at
// k * hop of the padded signal. Returns n_frames x (fft/2 + 1).
Eigen::MatrixXd stft_magnitude(const std::vector<float>& x, int fft, int hop, int win, Eigen::Index n_frames);

// Slaney-scale triangular filterbank with Slaney area normalization, n_mels x (fft/2 + 1).
Eigen::MatrixXd mel_filterbank(const MelConfig& cfg);

// Frame count for a length-T signal: ceil(T / hop).
Eigen::Index mel_frames(long long num_samples, int hop);

MelSpec mel_spectrogram(const Waveform& w, const MelConfig& cfg);

PriorTrack energy_prior(const MelSpec& mel, int lo, int hi, double e_min, double e_max,
                        double std_floor = kDefaultStdFloor);
PriorTrack energy_prior(const MelSpec& mel, const EnergyBand& band, int band_id,
                        double std_floor = kDefaultStdFloor);

std::vector<float> prior_to_sample_std(const PriorTrack& p, int hop, long long target_len);

// Flat little-endian float32 frame-major matrix at `path` plus `path`.json
// holding frames, n_mels, the optional sample count and the mel config.
void save_mel(const MelSpec& mel, const std::filesystem::path& path);
MelSpec load_mel(const std::filesystem::path& path);

}  // namespace periodwave
