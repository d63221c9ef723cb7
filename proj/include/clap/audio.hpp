// Audio front-end: WAV I/O, clip truncation/padding, and the log-mel
// spectrogram pipeline (Hann window -> power FFT -> mel filterbank -> ln).

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "clap/rng.hpp"

namespace clap {

struct AudioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Waveform {
  std::vector<double> samples;  // in [-1, 1]
  double sample_rate = 44100.0;

  double seconds() const { return (double)samples.size() / sample_rate; }
};

struct MelConfig {
  double sample_rate_hz = 44100.0;
  std::size_t window_size = 1024;
  std::size_t hop_size = 320;
  std::size_t n_mels = 64;
  double fmin_hz = 50.0;
  double fmax_hz = 8000.0;
  double clip_seconds = 7.0;
  double log_epsilon = 1e-10;

  void validate() const {
    if (sample_rate_hz <= 0 || window_size == 0 || n_mels < 1)
      throw AudioError("mel config: invalid sizes");
    if (hop_size == 0 || hop_size > window_size)
      throw AudioError("mel config: window_size must be >= hop_size > 0");
    if (!(fmin_hz < fmax_hz))
      throw AudioError("mel config: fmin must be < fmax");
    if (fmax_hz > sample_rate_hz / 2.0)
      throw AudioError("mel config: fmax " + std::to_string(fmax_hz) +
                       " Hz above Nyquist " +
                       std::to_string(sample_rate_hz / 2.0) + " Hz");
    if (clip_seconds <= 0) throw AudioError("mel config: clip_seconds <= 0");
  }

  std::size_t n_fft_bins() const { return window_size / 2 + 1; }

  std::size_t frame_count(std::size_t n_samples) const {
    if (n_samples < window_size) return 0;
    return (n_samples - window_size) / hop_size + 1;
  }
};

struct MelSpectrogram {
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  std::vector<double> values;  // row-major [n_mels x n_frames]
  MelConfig config;

  double at(std::size_t mel, std::size_t frame) const {
    return values[mel * n_frames + frame];
  }
};

inline double hz_to_mel(double hz) {
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

// Random contiguous truncation to clip_seconds, or zero-padding if shorter.
inline Waveform truncate_or_pad(const Waveform& w, double clip_seconds,
                                Rng& rng) {
  if (w.samples.empty()) throw AudioError("truncate_or_pad: empty waveform");
  if (clip_seconds <= 0) throw AudioError("truncate_or_pad: clip_seconds <= 0");
  const std::size_t target =
      (std::size_t)std::llround(clip_seconds * w.sample_rate);
  Waveform out;
  out.sample_rate = w.sample_rate;
  if (w.samples.size() == target) {
    out.samples = w.samples;
  } else if (w.samples.size() > target) {
    std::size_t max_offset = w.samples.size() - target;
    std::size_t offset = (std::size_t)rng.below(max_offset + 1);
    out.samples.assign(w.samples.begin() + offset,
                       w.samples.begin() + offset + target);
  } else {
    out.samples = w.samples;
    out.samples.resize(target, 0.0);
  }
  return out;
}

namespace detail {

// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw AudioError("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * 3.141592653589793 / (double)len;
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace detail

// Triangular mel filterbank, [n_mels x (window_size/2 + 1)], row-major.
// Centers are equally spaced on the mel scale between mel(fmin) and mel(fmax).
inline std::vector<double> mel_filterbank(const MelConfig& cfg) {
  cfg.validate();
  const std::size_t n_bins = cfg.n_fft_bins();
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges_hz(cfg.n_mels + 2);
  for (std::size_t m = 0; m < cfg.n_mels + 2; ++m)
    edges_hz[m] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * (double)m /
                                         (double)(cfg.n_mels + 1));
  std::vector<double> fb(cfg.n_mels * n_bins, 0.0);
  const double bin_hz = cfg.sample_rate_hz / (double)cfg.window_size;
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges_hz[m], center = edges_hz[m + 1], hi = edges_hz[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double f = (double)k * bin_hz;
      double w = 0.0;
      if (f > lo && f < center)
        w = (f - lo) / (center - lo);
      else if (f >= center && f < hi)
        w = (hi - f) / (hi - center);
      fb[m * n_bins + k] = std::max(0.0, w);
    }
  }
  return fb;
}

// Frame count: T = floor((len - window) / hop) + 1, frames starting at 0.
inline MelSpectrogram log_mel(const Waveform& w, const MelConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != cfg.sample_rate_hz)
    throw AudioError("log_mel: waveform rate " + std::to_string(w.sample_rate) +
                     " != config rate " + std::to_string(cfg.sample_rate_hz) +
                     " (resampling is unsupported)");
  if (w.samples.size() < cfg.window_size)
    throw AudioError("log_mel: input of " + std::to_string(w.samples.size()) +
                     " samples shorter than window " +
                     std::to_string(cfg.window_size));
  const std::size_t n_frames = cfg.frame_count(w.samples.size());
  const std::size_t n_bins = cfg.n_fft_bins();
  const std::size_t win = cfg.window_size;

  std::vector<double> hann(win);
  for (std::size_t i = 0; i < win; ++i)
    hann[i] = 0.5 * (1.0 - std::cos(2.0 * 3.141592653589793 * (double)i /
                                    (double)win));

  const std::vector<double> fb = mel_filterbank(cfg);

  MelSpectrogram spec;
  spec.n_mels = cfg.n_mels;
  spec.n_frames = n_frames;
  spec.config = cfg;
  spec.values.assign(cfg.n_mels * n_frames, 0.0);

  std::vector<std::complex<double>> buf(win);
  std::vector<double> power(n_bins);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = t * cfg.hop_size;
    for (std::size_t i = 0; i < win; ++i)
      buf[i] = std::complex<double>(w.samples[start + i] * hann[i], 0.0);
    detail::fft_radix2(buf);
    for (std::size_t k = 0; k < n_bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const double* row = fb.data() + m * n_bins;
      for (std::size_t k = 0; k < n_bins; ++k) acc += row[k] * power[k];
      spec.values[m * n_frames + t] = std::log(acc + cfg.log_epsilon);
    }
  }
  return spec;
}

// --- WAV I/O (mono PCM16 / float32 only) -----------------------------------

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return (std::uint32_t)p[0] | ((std::uint32_t)p[1] << 8) |
         ((std::uint32_t)p[2] << 16) | ((std::uint32_t)p[3] << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return (std::uint16_t)((std::uint32_t)p[0] | ((std::uint32_t)p[1] << 8));
}

}  // namespace detail

inline Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("read_wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw AudioError("read_wav: " + path + " is not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0, data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::uint32_t chunk_len = detail::read_u32(bytes.data() + pos + 4);
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (pos + 8 + 16 > bytes.size()) throw AudioError("read_wav: bad fmt chunk");
      format = detail::read_u16(bytes.data() + pos + 8);
      channels = detail::read_u16(bytes.data() + pos + 10);
      rate = detail::read_u32(bytes.data() + pos + 12);
      bits = detail::read_u16(bytes.data() + pos + 22);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data_off = pos + 8;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (data_off == 0) throw AudioError("read_wav: no data chunk in " + path);
  if (channels != 1)
    throw AudioError("read_wav: " + path + " has " + std::to_string(channels) +
                     " channels; only mono is supported");
  if (data_off + data_len > bytes.size())
    throw AudioError("read_wav: truncated data chunk in " + path);

  Waveform w;
  w.sample_rate = (double)rate;
  if (format == 1 && bits == 16) {
    std::size_t n = data_len / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::int16_t s = (std::int16_t)detail::read_u16(bytes.data() + data_off + 2 * i);
      w.samples[i] = (double)s / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    std::size_t n = data_len / 4;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = detail::read_u32(bytes.data() + data_off + 4 * i);
      float f;
      std::memcpy(&f, &u, 4);
      w.samples[i] = (double)f;
    }
  } else {
    throw AudioError("read_wav: " + path + " uses format " +
                     std::to_string(format) + "/" + std::to_string(bits) +
                     "-bit; only 16-bit PCM and 32-bit float are supported");
  }
  if (w.samples.empty()) throw AudioError("read_wav: " + path + " has no samples");
  return w;
}

inline void write_wav_pcm16(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw AudioError("write_wav: cannot open " + path);
  auto put_u32 = [&](std::uint32_t v) {
    char b[4] = {(char)(v & 0xff), (char)((v >> 8) & 0xff),
                 (char)((v >> 16) & 0xff), (char)((v >> 24) & 0xff)};
    out.write(b, 4);
  };
  auto put_u16 = [&](std::uint16_t v) {
    char b[2] = {(char)(v & 0xff), (char)((v >> 8) & 0xff)};
    out.write(b, 2);
  };
  const std::uint32_t n = (std::uint32_t)w.samples.size();
  const std::uint32_t rate = (std::uint32_t)std::llround(w.sample_rate);
  out.write("RIFF", 4);
  put_u32(36 + n * 2);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(rate);
  put_u32(rate * 2);
  put_u16(2);
  put_u16(16);
  out.write("data", 4);
  put_u32(n * 2);
  for (double s : w.samples) {
    double clipped = std::clamp(s, -1.0, 1.0);
    put_u16((std::uint16_t)(std::int16_t)std::llround(clipped * 32767.0));
  }
}

}  // namespace clap
