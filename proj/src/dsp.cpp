// src/dsp.cpp
#include "diarkit/dsp.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "diarkit/error.hpp"

namespace diarkit {

namespace {

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

std::size_t samples_for(double seconds, int sample_rate) {
  return static_cast<std::size_t>(std::lround(seconds * sample_rate));
}

}  // namespace

AudioBuffer AudioBuffer::slice(double start_s, double end_s) const {
  AudioBuffer out;
  out.sample_rate = sample_rate;
  const auto n = samples.size();
  const auto b = std::min(n, samples_for(std::max(0.0, start_s), sample_rate));
  const auto e = std::min(n, samples_for(std::max(0.0, end_s), sample_rate));
  if (e > b) out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(b),
                                samples.begin() + static_cast<std::ptrdiff_t>(e));
  return out;
}

FeatureMatrix FeatureMatrix::rows(std::size_t begin, std::size_t end) const {
  end = std::min(end, frames);
  begin = std::min(begin, end);
  FeatureMatrix out(end - begin, bins);
  out.frame_shift_s = frame_shift_s;
  out.frame_len_s = frame_len_s;
  std::copy(data.begin() + static_cast<std::ptrdiff_t>(begin * bins),
            data.begin() + static_cast<std::ptrdiff_t>(end * bins), out.data.begin());
  return out;
}

// ---------------------------------------------------------------------------
// WAV

AudioBuffer parse_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw FormatError("truncated fmt chunk");
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real tag in the sub-format GUID.
      if (format == 0xFFFE && size >= 26) format = read_u16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      if (format != 1) throw UnsupportedFormatError("only PCM encoding is supported");
      if (channels != 1)
        throw UnsupportedFormatError("only mono audio is supported, got " +
                                     std::to_string(channels) + " channels");
      if (bits != 16) throw UnsupportedFormatError("only 16-bit samples are supported");
      if (rate != 8000 && rate != 16000)
        throw UnsupportedFormatError("unsupported sample rate " + std::to_string(rate));
      if (body + size > bytes.size()) throw FormatError("truncated data chunk");

      AudioBuffer out;
      out.sample_rate = static_cast<int>(rate);
      out.samples.resize(size / 2);
      for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(read_u16(bytes.data() + body + 2 * i));
        out.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw FormatError(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio) {
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (float s : audio.samples) {
    const double scaled = std::clamp(std::round(static_cast<double>(s) * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  const auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Resampling

const std::vector<double>& decimation_filter() {
  static const std::vector<double> taps = [] {
    constexpr int kTaps = 129;
    constexpr double kCutoff = 3800.0 / 16000.0;  // normalized to the input rate
    const int mid = kTaps / 2;
    std::vector<double> h(kTaps);
    double sum = 0.0;
    for (int i = 0; i < kTaps; ++i) {
      const double n = i - mid;
      const double sinc = n == 0 ? 2.0 * kCutoff
                                 : std::sin(2.0 * std::numbers::pi * kCutoff * n) / (std::numbers::pi * n);
      const double x = 2.0 * std::numbers::pi * i / (kTaps - 1);
      const double blackman = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
      h[i] = sinc * blackman;
      sum += h[i];
    }
    for (auto& v : h) v /= sum;
    return h;
  }();
  return taps;
}

AudioBuffer resample_to_8k(const AudioBuffer& audio) {
  if (audio.sample_rate != 16000)
    throw PreconditionError("resample_to_8k expects 16 kHz input, got " +
                            std::to_string(audio.sample_rate));
  const auto& h = decimation_filter();
  const auto mid = static_cast<std::ptrdiff_t>(h.size() / 2);
  const auto n = static_cast<std::ptrdiff_t>(audio.samples.size());

  AudioBuffer out;
  out.sample_rate = 8000;
  out.samples.resize(static_cast<std::size_t>((n + 1) / 2));
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(out.samples.size()); ++m) {
    const std::ptrdiff_t centre = 2 * m;
    double acc = 0.0;
    const std::ptrdiff_t k0 = std::max<std::ptrdiff_t>(0, centre + mid - (n - 1));
    const std::ptrdiff_t k1 = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(h.size()) - 1, centre + mid);
    for (std::ptrdiff_t k = k0; k <= k1; ++k) acc += h[static_cast<std::size_t>(k)] * audio.samples[static_cast<std::size_t>(centre + mid - k)];
    out.samples[static_cast<std::size_t>(m)] = static_cast<float>(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral analysis

std::size_t num_frames(std::size_t num_samples, std::size_t frame_len, std::size_t hop) {
  if (num_samples < frame_len || frame_len == 0 || hop == 0) return 0;
  return (num_samples - frame_len) / hop + 1;
}

void fft(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (n == 0 || (n & (n - 1)) != 0) throw ParameterError("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> step(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = data[i + k];
        const auto v = data[i + k + len / 2] * w;
        data[i + k] = u + v;
        data[i + k + len / 2] = u - v;
        w *= step;
      }
    }
  }
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

Spectrogram stft_magnitude(const AudioBuffer& audio, const FrameConfig& cfg) {
  const auto frame_len = samples_for(cfg.frame_len_s, audio.sample_rate);
  const auto hop = samples_for(cfg.hop_s, audio.sample_rate);
  const auto nfft = static_cast<std::size_t>(cfg.nfft);
  if (frame_len == 0 || hop == 0 || nfft < frame_len)
    throw ParameterError("invalid STFT configuration");
  const auto frames = num_frames(audio.samples.size(), frame_len, hop);
  if (frames == 0) throw EmptyInputError("audio shorter than one analysis frame");

  const auto window = hann_window(frame_len);
  double window_sum = 0.0;
  for (double w : window) window_sum += w;

  Spectrogram spec;
  spec.frames = frames;
  spec.bins = nfft / 2 + 1;
  spec.bin_hz = static_cast<double>(audio.sample_rate) / static_cast<double>(nfft);
  spec.magnitudes.resize(frames * spec.bins);

  std::vector<std::complex<double>> buf(nfft);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const float* x = audio.samples.data() + t * hop;
    for (std::size_t i = 0; i < frame_len; ++i) buf[i] = window[i] * static_cast<double>(x[i]);
    fft(buf);
    for (std::size_t k = 0; k < spec.bins; ++k)
      spec.magnitudes[t * spec.bins + k] = std::abs(buf[k]) / window_sum;
  }
  return spec;
}

std::vector<double> mel_filterbank(int n_mels, int nfft, int sample_rate) {
  if (n_mels < 1 || n_mels > nfft / 2)
    throw ParameterError("n_mels must lie in [1, nfft/2], got " + std::to_string(n_mels));
  const std::size_t bins = static_cast<std::size_t>(nfft / 2 + 1);
  const double nyquist = sample_rate / 2.0;
  const double mel_hi = hz_to_mel(nyquist);

  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_hi * static_cast<double>(i) / static_cast<double>(n_mels + 1));

  std::vector<double> fb(static_cast<std::size_t>(n_mels) * bins, 0.0);
  const double bin_hz = static_cast<double>(sample_rate) / nfft;
  for (std::size_t m = 0; m < static_cast<std::size_t>(n_mels); ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= centre) w = (f - lo) / (centre - lo);
      else if (f > centre && f < hi) w = (hi - f) / (hi - centre);
      fb[m * bins + k] = w;
    }
  }
  return fb;
}

FeatureMatrix log_mel(const AudioBuffer& audio, int n_mels, const FrameConfig& cfg) {
  const auto fb = mel_filterbank(n_mels, cfg.nfft, audio.sample_rate);
  const auto spec = stft_magnitude(audio, cfg);
  constexpr double kFloor = 1e-10;

  FeatureMatrix out(spec.frames, static_cast<std::size_t>(n_mels));
  out.frame_shift_s = cfg.hop_s;
  out.frame_len_s = cfg.frame_len_s;
  std::vector<double> power(spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < spec.bins; ++k) {
      const double m = spec.at(t, k);
      power[k] = m * m;
    }
    for (std::size_t m = 0; m < out.bins; ++m) {
      const double* w = fb.data() + m * spec.bins;
      double e = 0.0;
      for (std::size_t k = 0; k < spec.bins; ++k) e += w[k] * power[k];
      out.at(t, m) = std::log(std::max(e, kFloor));
    }
  }
  return out;
}

FeatureMatrix mean_normalize(FeatureMatrix features) {
  if (features.frames == 0) return features;
  std::vector<double> mean(features.bins, 0.0);
  for (std::size_t t = 0; t < features.frames; ++t)
    for (std::size_t b = 0; b < features.bins; ++b) mean[b] += features.at(t, b);
  for (auto& m : mean) m /= static_cast<double>(features.frames);
  for (std::size_t t = 0; t < features.frames; ++t)
    for (std::size_t b = 0; b < features.bins; ++b) features.at(t, b) -= mean[b];
  return features;
}

}  // namespace diarkit
