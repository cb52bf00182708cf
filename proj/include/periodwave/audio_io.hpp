#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace periodwave {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double duration_seconds() const { return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0; }
};

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// kFloat32Unclamped stores floats verbatim, for intermediates such as wavelet
// bands whose range exceeds [-1, 1].
enum class WavEncoding { kPcm16, kFloat32, kFloat32Unclamped };

// Throws AudioError on a bad rate or non-finite samples.
void validate(const Waveform& w);

// Mono RIFF/WAVE, 16-bit PCM or 32-bit IEEE float.
Waveform load_wav(const std::filesystem::path& path);

// Out-of-range samples saturate to the encoding limits. Returns the number of
// clipped samples so callers can warn.
std::size_t save_wav(const Waveform& w, const std::filesystem::path& path,
                     WavEncoding encoding = WavEncoding::kFloat32);

// Copies [start, start + length), zero-padding past the end of the signal.
Waveform segment(const Waveform& w, long long start, long long length);

}  // namespace periodwave
