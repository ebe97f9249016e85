#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ggen/common.hpp"

namespace ggen {

struct WavData {
  int sample_rate = 0;
  std::vector<double> samples;  // mono, in [-1, 1] for full-scale PCM
};

namespace detail {

template <typename T>
T read_le(std::istream& in, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw input_error(std::string("wav: truncated file while reading ") + what);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  T out;
  std::memcpy(&out, &v, sizeof(T));
  return out;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  std::uint64_t v = 0;
  std::memcpy(&v, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace detail

// RIFF/WAVE reader for PCM-16 and IEEE float-32. Multi-channel input is
// averaged down to mono. Sample values are returned exactly as decoded
// (PCM divided by 32768); no gain is applied here.
inline WavData parse_wav(std::istream& in) {
  char tag[4];
  auto read_tag = [&](const char* what) {
    if (!in.read(tag, 4)) throw input_error(std::string("wav: truncated file while reading ") + what);
  };
  read_tag("RIFF header");
  if (std::memcmp(tag, "RIFF", 4) != 0) throw input_error("wav: missing RIFF header");
  detail::read_le<std::uint32_t>(in, "RIFF size");
  read_tag("WAVE tag");
  if (std::memcmp(tag, "WAVE", 4) != 0) throw input_error("wav: missing WAVE tag");

  int format = 0, channels = 0, bits = 0, rate = 0;
  bool have_fmt = false;
  std::vector<char> data;
  bool have_data = false;

  while (in.peek() != EOF) {
    read_tag("chunk id");
    const auto size = detail::read_le<std::uint32_t>(in, "chunk size");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw input_error("wav: fmt chunk too small");
      format = detail::read_le<std::uint16_t>(in, "format tag");
      channels = detail::read_le<std::uint16_t>(in, "channel count");
      rate = static_cast<int>(detail::read_le<std::uint32_t>(in, "sample rate"));
      detail::read_le<std::uint32_t>(in, "byte rate");
      detail::read_le<std::uint16_t>(in, "block align");
      bits = detail::read_le<std::uint16_t>(in, "bits per sample");
      in.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      if (!in.read(data.data(), size)) throw input_error("wav: truncated data chunk");
      have_data = true;
    } else {
      in.ignore(size);
    }
    if (size % 2) in.ignore(1);  // chunks are word-aligned
  }
  if (!have_fmt) throw input_error("wav: missing fmt chunk");
  if (!have_data) throw input_error("wav: missing data chunk");
  if (channels < 1) throw input_error("wav: zero channels");

  WavData wav;
  wav.sample_rate = rate;
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    throw input_error("wav: unsupported codec (format tag " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits); only PCM-16 and float-32 are supported");

  const std::size_t bytes_per = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per * static_cast<std::size_t>(channels);
  const std::size_t frames = data.size() / frame_bytes;
  wav.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0;
    for (int c = 0; c < channels; ++c) {
      const char* p = data.data() + i * frame_bytes + static_cast<std::size_t>(c) * bytes_per;
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += static_cast<double>(v);
      }
    }
    wav.samples[i] = acc / channels;
  }
  return wav;
}

inline WavData load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot open wav file: " + path);
  try {
    return parse_wav(f);
  } catch (const input_error& e) {
    throw input_error(path + ": " + e.what());
  }
}

inline void write_wav_pcm16(std::ostream& out, const std::vector<double>& samples, int rate) {
  const std::uint32_t data_size = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  detail::write_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  detail::write_le<std::uint32_t>(out, 16);
  detail::write_le<std::uint16_t>(out, 1);  // PCM
  detail::write_le<std::uint16_t>(out, 1);  // mono
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rate));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(rate * 2));
  detail::write_le<std::uint16_t>(out, 2);
  detail::write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  detail::write_le<std::uint32_t>(out, data_size);
  for (double s : samples) {
    const double clipped = std::min(1.0, std::max(-1.0, s));
    const auto v = static_cast<std::int16_t>(std::lround(clipped * 32767.0));
    detail::write_le<std::int16_t>(out, v);
  }
}

inline void save_wav_pcm16(const std::string& path, const std::vector<double>& samples, int rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw input_error("cannot write wav file: " + path);
  write_wav_pcm16(f, samples, rate);
}

namespace detail {

inline double bessel_i0(double x) {
  // Series expansion; converges quickly for the beta values used here.
  double sum = 1.0, term = 1.0;
  for (int k = 1; k < 64; ++k) {
    term *= (x / (2.0 * k)) * (x / (2.0 * k));
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace detail

// Kaiser-windowed sinc resampler. Identity when the rates already match, so
// 16 kHz input passes through bit-exactly.
inline std::vector<double> resample(const std::vector<double>& in, int in_rate, int out_rate) {
  if (in_rate <= 0 || out_rate <= 0) throw input_error("resample: rates must be positive");
  if (in_rate == out_rate) return in;
  if (in.empty()) return {};

  const double ratio = static_cast<double>(in_rate) / out_rate;
  // Cutoff in cycles per input sample, backed off 5% from the tighter Nyquist.
  const double cutoff = 0.5 * std::min(1.0, 1.0 / ratio) * 0.95;
  const int half_width = static_cast<int>(std::ceil(32.0 * std::max(1.0, ratio)));
  const double beta = 10.0;
  const double i0_beta = detail::bessel_i0(beta);

  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in.size()) * out_rate / in_rate));
  std::vector<double> out(out_len);
  for (std::size_t n = 0; n < out_len; ++n) {
    const double center = static_cast<double>(n) * ratio;
    const auto lo = static_cast<std::int64_t>(std::ceil(center)) - half_width;
    const auto hi = static_cast<std::int64_t>(std::floor(center)) + half_width;
    double acc = 0, wsum = 0;
    for (std::int64_t k = std::max<std::int64_t>(lo, 0);
         k <= std::min<std::int64_t>(hi, static_cast<std::int64_t>(in.size()) - 1); ++k) {
      const double x = static_cast<double>(k) - center;
      const double frac = x / half_width;
      const double window = detail::bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) / i0_beta;
      const double w = 2.0 * cutoff * detail::sinc(2.0 * cutoff * x) * window;
      acc += in[static_cast<std::size_t>(k)] * w;
      wsum += w;
    }
    out[n] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

// Scales so the peak magnitude sits at `target_dbfs`. Silence is returned
// unchanged.
inline std::vector<double> peak_normalize(std::vector<double> samples, double target_dbfs = -3.0) {
  double peak = 0;
  for (double s : samples) peak = std::max(peak, std::abs(s));
  if (peak <= 0) return samples;
  const double gain = std::pow(10.0, target_dbfs / 20.0) / peak;
  for (double& s : samples) s *= gain;
  return samples;
}

// Splits into fixed-length windows; the final window is zero-padded.
inline std::vector<std::vector<double>> segment_speech(const std::vector<double>& samples,
                                                       std::size_t segment_len = 64000) {
  if (segment_len == 0) throw input_error("segment_speech: zero segment length");
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start < samples.size(); start += segment_len) {
    std::vector<double> seg(segment_len, 0.0);
    const std::size_t n = std::min(segment_len, samples.size() - start);
    std::copy(samples.begin() + static_cast<std::ptrdiff_t>(start),
              samples.begin() + static_cast<std::ptrdiff_t>(start + n), seg.begin());
    out.push_back(std::move(seg));
  }
  return out;
}

// In-place iterative radix-2 FFT.
inline void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw internal_error("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

struct MelConfig {
  int sample_rate = 16000;
  int bins = 80;
  int window = 400;  // 25 ms at 16 kHz
  int hop = 800;     // one analysis frame per 20 fps motion frame
  int fft_size = 512;
  double floor_db = 1e-10;  // power floor before the log
};

// Triangular filterbank on the mel scale, filters normalized to unit peak.
inline Mat mel_filterbank(const MelConfig& cfg) {
  auto hz_to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto mel_to_hz = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
  const int half = cfg.fft_size / 2 + 1;
  const double mel_max = hz_to_mel(cfg.sample_rate / 2.0);
  Mat fb = Mat::Zero(cfg.bins, half);
  for (int b = 0; b < cfg.bins; ++b) {
    const double m_lo = mel_max * b / (cfg.bins + 1);
    const double m_mid = mel_max * (b + 1) / (cfg.bins + 1);
    const double m_hi = mel_max * (b + 2) / (cfg.bins + 1);
    const double f_lo = mel_to_hz(m_lo), f_mid = mel_to_hz(m_mid), f_hi = mel_to_hz(m_hi);
    for (int k = 0; k < half; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      if (f <= f_lo || f >= f_hi) continue;
      fb(b, k) = f < f_mid ? (f - f_lo) / (f_mid - f_lo) : (f_hi - f) / (f_hi - f_mid);
    }
  }
  return fb;
}

// Log-mel spectrogram with one row per hop. Windows that run past the end
// of the signal read zeros.
inline Mat log_mel_spectrogram(const std::vector<double>& samples, const MelConfig& cfg) {
  if (cfg.window > cfg.fft_size) throw internal_error("mel: window larger than fft size");
  const auto frames = static_cast<Eigen::Index>(samples.size() / static_cast<std::size_t>(cfg.hop));
  const Mat fb = mel_filterbank(cfg);
  const int half = cfg.fft_size / 2 + 1;
  Mat out(frames, cfg.bins);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_size));
  Vec power(half);
  for (Eigen::Index f = 0; f < frames; ++f) {
    const std::size_t start = static_cast<std::size_t>(f) * static_cast<std::size_t>(cfg.hop);
    for (int i = 0; i < cfg.fft_size; ++i) {
      double s = 0;
      if (i < cfg.window) {
        const std::size_t idx = start + static_cast<std::size_t>(i);
        if (idx < samples.size()) {
          const double hann = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (cfg.window - 1));
          s = samples[idx] * hann;
        }
      }
      buf[static_cast<std::size_t>(i)] = {s, 0.0};
    }
    fft_radix2(buf);
    for (int k = 0; k < half; ++k) power[k] = std::norm(buf[static_cast<std::size_t>(k)]);
    Vec mel = fb * power;
    for (int b = 0; b < cfg.bins; ++b) out(f, b) = std::log(std::max(mel[b], cfg.floor_db));
  }
  return out;
}

}  // namespace ggen
