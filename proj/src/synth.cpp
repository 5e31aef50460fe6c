// src/synth.cpp
#include "diarkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "diarkit/error.hpp"
#include "diarkit/eval.hpp"
#include "diarkit/layers.hpp"
#include "diarkit/rng.hpp"
#include "diarkit/segmenter.hpp"
#include "diarkit/vad.hpp"

namespace diarkit {

void SynthSpec::validate() const {
  if (n_speakers < 1) throw ParameterError("n_speakers must be at least 1");
  if (!(duration_s > 0.0)) throw ParameterError("duration_s must be positive");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) throw ParameterError("overlap_fraction must be in [0, 1)");
  if (!(turn_min_s > 0.0) || !(turn_max_s >= turn_min_s)) throw ParameterError("need 0 < turn_min_s <= turn_max_s");
  if (!(max_gap_s >= 0.0)) throw ParameterError("max_gap_s must be non-negative");
  if (!(noise_sigma >= 0.0)) throw ParameterError("noise_sigma must be non-negative");
  if (sample_rate <= 0) throw ParameterError("sample_rate must be positive");
}

std::string synth_speaker_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%02zu", index + 1);
  return buf;
}

Diarization gen_turns(const SynthSpec& spec, const std::string& recording_id) {
  spec.validate();
  Rng rng(spec.seed);
  Diarization d;
  d.recording_id = recording_id;

  // Speakers cycle through a fresh shuffle each round, never repeating back to back.
  std::vector<std::size_t> order;
  std::size_t pos = 0, last = SIZE_MAX;
  auto next_speaker = [&] {
    if (spec.n_speakers == 1) return std::size_t{0};
    if (pos == order.size()) {
      order.resize(spec.n_speakers);
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
      if (order.front() == last) std::swap(order.front(), order.back());
      pos = 0;
    }
    return last = order[pos++];
  };

  double prev_end = rng.uniform(0.0, spec.max_gap_s), prev_len = 0.0;
  std::vector<double> speaker_end(spec.n_speakers, 0.0);
  bool first = true;
  while (true) {
    const std::size_t spk = next_speaker();
    const double len = rng.uniform(spec.turn_min_s, spec.turn_max_s);
    double start = prev_end;
    const bool overlap = !first && spec.n_speakers > 1 && rng.uniform() < 0.5;
    if (overlap) {
      start = prev_end - std::min(2.0 * spec.overlap_fraction * len, 0.5 * std::min(prev_len, len));
    } else if (!first) {
      start = prev_end + rng.uniform(0.0, spec.max_gap_s);
    }
    // A short or truncated turn in between must not let a speaker overlap itself.
    start = std::max(start, speaker_end[spk]);
    if (start >= spec.duration_s) break;
    // Turn times are kept on a 1 ms grid so RTTM round-trips are exact.
    const double s = std::round(start * 1000.0) / 1000.0;
    const double e = std::round(std::min(start + len, spec.duration_s) * 1000.0) / 1000.0;
    if (e - s < 0.3) break;
    d.turns.push_back({{s, e}, synth_speaker_name(spk)});
    prev_end = e;
    prev_len = e - s;
    speaker_end[spk] = e;
    first = false;
  }
  return d;
}

EmbeddingStream gen_embedding_stream(const SynthSpec& spec) {
  spec.validate();
  if (spec.n_speakers > kEmbeddingDim)
    throw ParameterError("at most " + std::to_string(kEmbeddingDim) + " orthonormal speakers");
  EmbeddingStream out;
  out.reference = gen_turns(spec, "synth");

  Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto q = random_rotation(kEmbeddingDim, rng);
  for (std::size_t k = 0; k < spec.n_speakers; ++k)
    out.prototypes.emplace_back(q.begin() + static_cast<std::ptrdiff_t>(k * kEmbeddingDim),
                                q.begin() + static_cast<std::ptrdiff_t>((k + 1) * kEmbeddingDim));

  struct Item {
    Segment seg;
    std::size_t spk;
  };
  std::vector<Item> items;
  for (const auto& t : out.reference.turns) {
    const auto spk = static_cast<std::size_t>(std::stoul(t.speaker.substr(3)) - 1);
    for (const auto& s : uniform_segments({t.segment}, kNctsTraining)) items.push_back({s, spk});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.seg.start < b.seg.start; });
  for (const auto& it : items) {
    Embedding e = out.prototypes[it.spk];
    if (spec.noise_sigma > 0.0)
      for (double& v : e) v += spec.noise_sigma * rng.gaussian();
    out.segments.push_back({it.seg, std::move(e)});
    out.speakers.push_back(it.spk);
  }
  return out;
}

double tone_fundamental(std::size_t index) {
  static constexpr double kFundamentals[kMaxToneSpeakers] = {180, 660, 420, 960, 300, 780, 240, 1020};
  if (index >= kMaxToneSpeakers) throw ParameterError("at most 8 tone speakers");
  return kFundamentals[index];
}

AudioConversation gen_audio_conversation(const SynthSpec& spec, const std::string& recording_id) {
  spec.validate();
  if (spec.n_speakers > kMaxToneSpeakers) throw ParameterError("at most 8 tone speakers");
  AudioConversation conv;
  conv.reference = gen_turns(spec, recording_id);
  const int sr = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * sr));
  std::vector<double> mix(n, 0.0);

  constexpr double kAmplitudes[3] = {1.0, 0.5, 0.25};
  constexpr double kScale = 0.3 / 1.75;
  const auto ramp = static_cast<std::size_t>(std::lround(0.010 * sr));
  for (const auto& t : conv.reference.turns) {
    const auto spk = static_cast<std::size_t>(std::stoul(t.speaker.substr(3)) - 1);
    const double f0 = tone_fundamental(spk);
    const auto b = static_cast<std::size_t>(std::lround(t.segment.start * sr));
    const auto e = std::min(n, static_cast<std::size_t>(std::lround(t.segment.end * sr)));
    const std::size_t len = e - b;
    for (std::size_t i = b; i < e; ++i) {
      const double time = static_cast<double>(i) / sr;
      double v = 0.0;
      for (int h = 0; h < 3; ++h) v += kAmplitudes[h] * std::sin(2.0 * std::numbers::pi * f0 * (h + 1) * time);
      const std::size_t from_edge = std::min(i - b, e - 1 - i);
      double env = 1.0;
      if (from_edge < ramp && len > 2 * ramp)
        env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(from_edge + 1) / static_cast<double>(ramp + 1));
      mix[i] += kScale * env * v;
    }
  }
  if (spec.noise_sigma > 0.0) {
    Rng rng(spec.seed ^ 0x5bd1e995ULL);
    for (double& v : mix) v += spec.noise_sigma * rng.gaussian();
  }
  conv.audio.sample_rate = sr;
  conv.audio.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) conv.audio.samples[i] = static_cast<float>(mix[i]);
  return conv;
}

std::vector<double> band_energy(const AudioBuffer& audio, std::size_t center, std::size_t window) {
  constexpr std::size_t kBands = kEmbeddingDim;
  constexpr double kBandHz = 4000.0 / kBands;
  std::size_t nfft = 1;
  while (nfft < window) nfft <<= 1;
  const auto hann = hann_window(window);
  std::vector<std::complex<double>> buf(nfft, 0.0);
  const long first = static_cast<long>(center) - static_cast<long>(window / 2);
  for (std::size_t i = 0; i < window; ++i) {
    const long idx = first + static_cast<long>(i);
    if (idx >= 0 && idx < static_cast<long>(audio.samples.size()))
      buf[i] = hann[i] * audio.samples[static_cast<std::size_t>(idx)];
  }
  fft(buf);
  const double bin_hz = static_cast<double>(audio.sample_rate) / static_cast<double>(nfft);
  std::vector<double> bands(kBands, 0.0);
  for (std::size_t k = 0; k <= nfft / 2; ++k) {
    const auto band = static_cast<std::size_t>(static_cast<double>(k) * bin_hz / kBandHz);
    if (band < kBands) bands[band] += std::norm(buf[k]);
  }
  double mean = 0.0;
  for (double v : bands) mean += v;
  mean /= kBands;
  for (double& v : bands) v -= mean;
  return bands;
}

namespace {

std::size_t analysis_window(int sample_rate) {
  return static_cast<std::size_t>(std::lround(0.064 * sample_rate));
}

double cosine_or_zero(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return na > 0.0 && nb > 0.0 ? dot / std::sqrt(na * nb) : 0.0;
}

}  // namespace

Embedding ToneEmbedder::embed(const AudioBuffer& audio) const {
  const std::size_t window = analysis_window(audio.sample_rate);
  const std::size_t hop = window / 2;
  Embedding sum(kEmbeddingDim, 0.0);
  std::size_t count = 0;
  for (std::size_t start = 0; count == 0 || start + window <= audio.samples.size(); start += hop) {
    const auto e = band_energy(audio, start + window / 2, window);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += e[i];
    ++count;
  }
  // Cubing the (shifted back to non-negative) band powers lets whichever
  // speaker holds most of the window dominate its embedding.
  const double floor = *std::min_element(sum.begin(), sum.end());
  for (double& v : sum) v = std::pow(v - floor, 3.0);
  double mean = 0.0;
  for (double v : sum) mean += v;
  mean /= static_cast<double>(sum.size());
  for (double& v : sum) v -= mean;
  double norm = 0.0;
  for (double v : sum) norm += v * v;
  if (norm > 0.0)
    for (double& v : sum) v /= std::sqrt(norm);
  return sum;
}

std::vector<double> ToneTargetDetector::track(const AudioBuffer& audio, const Embedding& target) const {
  if (target.size() != kEmbeddingDim) throw ShapeError("target embedding must have 128 dimensions");
  const auto sr = audio.sample_rate;
  const auto frame_len = static_cast<std::size_t>(std::lround(0.025 * sr));
  const auto hop = static_cast<std::size_t>(std::lround(0.010 * sr));
  const std::size_t frames = num_frames(audio.samples.size(), frame_len, hop);
  const std::size_t window = analysis_window(sr);
  std::vector<double> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto e = band_energy(audio, t * hop + frame_len / 2, window);
    out[t] = nn::sigmoid(gain_ * (cosine_or_zero(e, target) - offset_));
  }
  return out;
}

std::vector<V2sSequence> gen_v2s_sequences(std::size_t n_sequences, std::size_t length, std::size_t n_speakers,
                                           double sigma, std::uint64_t seed, std::size_t dim,
                                           bool shared_prototypes) {
  if (n_speakers < 1 || n_speakers > dim || length < 1) throw ParameterError("invalid v2s dataset shape");
  Rng rng(seed);
  std::vector<V2sSequence> out;
  for (std::size_t s = 0; s < n_sequences; ++s) {
    std::vector<double> q(dim * dim, 0.0);
    if (shared_prototypes) {
      for (std::size_t k = 0; k < dim; ++k) q[k * dim + k] = 1.0;
    } else {
      q = random_rotation(dim, rng);
    }
    V2sSequence seq;
    for (std::size_t i = 0; i < length; ++i) {
      const auto spk = i < n_speakers ? i : static_cast<std::size_t>(rng.index(n_speakers));
      Embedding e(q.begin() + static_cast<std::ptrdiff_t>(spk * dim), q.begin() + static_cast<std::ptrdiff_t>((spk + 1) * dim));
      for (double& v : e) v += sigma * rng.gaussian();
      seq.embeddings.push_back(std::move(e));
      seq.speakers.push_back(static_cast<int>(spk));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void write_synth_case(const std::filesystem::path& dir, const std::string& stem, const AudioConversation& conv) {
  std::filesystem::create_directories(dir);
  write_wav(dir / (stem + ".wav"), conv.audio);
  Diarization ref = conv.reference;
  ref.recording_id = stem;
  {
    std::ofstream out(dir / (stem + ".rttm"));
    out << emit_rttm(to_rttm(ref));
    if (!out) throw InputError("cannot write " + (dir / (stem + ".rttm")).string());
  }
  std::vector<Segment> speech;
  for (const auto& t : ref.turns) speech.push_back(t.segment);
  std::ofstream lab(dir / (stem + ".lab"));
  char buf[64];
  for (const auto& s : merge_segments(speech)) {
    std::snprintf(buf, sizeof(buf), "%.3f %.3f\n", s.start, s.end);
    lab << buf;
  }
  if (!lab) throw InputError("cannot write " + (dir / (stem + ".lab")).string());
}

}  // namespace diarkit
