// include/diarkit/dsp.hpp
//
// Audio ingestion and the spectral front end: PCM-16 WAV I/O, 16k -> 8k
// decimation, Hann STFT magnitudes and log-Mel filterbank features.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace diarkit {

struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate = 16000;

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
  // Copy of samples in [start_s, end_s), clamped to the buffer.
  AudioBuffer slice(double start_s, double end_s) const;
};

// Row-major frames x bins.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> data;
  double frame_shift_s = 0.010;
  double frame_len_s = 0.025;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t t, std::size_t b, double fill = 0.0)
      : frames(t), bins(b), data(t * b, fill) {}

  double& at(std::size_t t, std::size_t b) { return data[t * bins + b]; }
  double at(std::size_t t, std::size_t b) const { return data[t * bins + b]; }
  std::span<const double> row(std::size_t t) const { return {data.data() + t * bins, bins}; }
  // Rows [begin, end).
  FeatureMatrix rows(std::size_t begin, std::size_t end) const;
};

struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;  // nfft / 2 + 1
  std::vector<double> magnitudes;
  double bin_hz = 0.0;

  double at(std::size_t t, std::size_t k) const { return magnitudes[t * bins + k]; }
};

struct FrameConfig {
  double frame_len_s = 0.025;
  double hop_s = 0.010;
  int nfft = 512;
};

AudioBuffer read_wav(const std::filesystem::path& path);
AudioBuffer parse_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

// Anti-aliased decimation by two (Blackman windowed sinc, 3.8 kHz cutoff).
AudioBuffer resample_to_8k(const AudioBuffer& audio);
// The FIR taps used by resample_to_8k; exposed for inspection.
const std::vector<double>& decimation_filter();

// floor((num_samples - frame_len) / hop) + 1, or 0 when the signal is shorter
// than one frame.
std::size_t num_frames(std::size_t num_samples, std::size_t frame_len, std::size_t hop);

// In-place radix-2 FFT; data.size() must be a power of two.
void fft(std::vector<std::complex<double>>& data);

// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

// Hann-windowed magnitudes divided by the window sum, so a full-scale
// bin-centred sine peaks near 0.5.
Spectrogram stft_magnitude(const AudioBuffer& audio, const FrameConfig& cfg = {});

// n_mels x (nfft/2 + 1) triangular HTK-scale filters spanning 0..Nyquist.
std::vector<double> mel_filterbank(int n_mels, int nfft, int sample_rate);

FeatureMatrix log_mel(const AudioBuffer& audio, int n_mels, const FrameConfig& cfg = {});

// Per-bin mean over frames subtracted.
FeatureMatrix mean_normalize(FeatureMatrix features);

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
}  // namespace diarkit
