#include "periodwave/audio_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>

namespace periodwave {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void write_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

void validate(const Waveform& w) {
  if (w.sample_rate <= 0) throw AudioError("waveform: sample_rate must be positive");
  for (float s : w.samples) {
    if (!std::isfinite(s)) throw AudioError("waveform: non-finite sample");
  }
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("load_wav: cannot open " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw AudioError("load_wav: not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::uint8_t* chunk = buf.data() + pos;
    const std::uint32_t size = read_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, buf.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw AudioError("load_wav: truncated fmt chunk");
      format = read_le<std::uint16_t>(buf.data() + body);
      channels = read_le<std::uint16_t>(buf.data() + body + 2);
      rate = read_le<std::uint32_t>(buf.data() + body + 4);
      bits = read_le<std::uint16_t>(buf.data() + body + 14);
      if (format == kFormatExtensible && avail >= 26) format = read_le<std::uint16_t>(buf.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = buf.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt || data == nullptr) throw AudioError("load_wav: missing fmt or data chunk in " + path.string());
  if (channels != 1) {
    throw AudioError("load_wav: only mono files are supported (" + std::to_string(channels) + " channels in " +
                     path.string() + ")");
  }

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_size / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.samples[i] = read_le<std::int16_t>(data + 2 * i) / 32768.0f;
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_size / 4;
    w.samples.resize(n);
    std::memcpy(w.samples.data(), data, n * 4);
  } else {
    throw AudioError("load_wav: unsupported encoding (format " + std::to_string(format) + ", " +
                     std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");
  }
  validate(w);
  return w;
}

std::size_t save_wav(const Waveform& w, const std::filesystem::path& path, WavEncoding encoding) {
  validate(w);
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * block);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw AudioError("save_wav: cannot write " + path.string());
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * block);
  write_le<std::uint16_t>(out, block);
  write_le<std::uint16_t>(out, bits);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);

  std::size_t clipped = 0;
  if (pcm) {
    std::vector<std::int16_t> pcm_data(w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      const float scaled = std::round(w.samples[i] * 32768.0f);
      if (scaled > 32767.0f || scaled < -32768.0f) ++clipped;
      pcm_data[i] = static_cast<std::int16_t>(std::clamp(scaled, -32768.0f, 32767.0f));
    }
    out.write(reinterpret_cast<const char*>(pcm_data.data()), static_cast<std::streamsize>(data_bytes));
  } else {
    std::vector<float> f(w.samples.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const float s = w.samples[i];
      if (encoding == WavEncoding::kFloat32Unclamped) {
        f[i] = s;
        continue;
      }
      if (s > 1.0f || s < -1.0f) ++clipped;
      f[i] = std::clamp(s, -1.0f, 1.0f);
    }
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(data_bytes));
  }
  if (!out) throw AudioError("save_wav: write failed for " + path.string());
  if (clipped > 0) {
    std::cerr << "warning: save_wav: " << clipped << " sample(s) outside [-1, 1] saturated in " << path.string()
              << "\n";
  }
  return clipped;
}

Waveform segment(const Waveform& w, long long start, long long length) {
  if (start < 0) throw std::invalid_argument("segment: negative start");
  if (length <= 0) throw std::invalid_argument("segment: length must be positive");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(static_cast<std::size_t>(length), 0.0f);
  const long long n = static_cast<long long>(w.samples.size());
  const long long end = std::min(n, start + length);
  if (start < end) std::copy(w.samples.begin() + start, w.samples.begin() + end, out.samples.begin());
  return out;
}

}  // namespace periodwave
