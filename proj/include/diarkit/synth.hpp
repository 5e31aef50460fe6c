// include/diarkit/synth.hpp
//
// Synthetic conversations with exact reference diarizations:
//   - embedding streams (speaker prototypes plus Gaussian noise) for the
//     clustering stages;
//   - tone-coded audio, where each speaker is a harmonic tone family, plus a
//     band-energy embedder and target detector that recognise those tones,
//     so the whole pipeline runs without trained weights.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "diarkit/cluster.hpp"
#include "diarkit/dsp.hpp"
#include "diarkit/models.hpp"
#include "diarkit/types.hpp"

namespace diarkit {

struct SynthSpec {
  std::size_t n_speakers = 2;
  double duration_s = 60.0;
  double overlap_fraction = 0.1;  // expected share of speech time with two talkers
  double turn_min_s = 2.0;
  double turn_max_s = 6.0;
  double max_gap_s = 0.5;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  int sample_rate = 16000;

  // Throws ParameterError when a field is out of range.
  void validate() const;
};

// Speaker names used by the generators: "spk01", "spk02", ...
std::string synth_speaker_name(std::size_t index);

// Alternating turns with uniform lengths; each change of speaker either
// overlaps the previous turn (probability 1/2, overlap 2 * overlap_fraction
// * length, at most half of either turn) or follows a uniform gap.
Diarization gen_turns(const SynthSpec& spec, const std::string& recording_id = "synth");

struct EmbeddingStream {
  std::vector<EmbeddedSegment> segments;  // sorted by start
  std::vector<std::size_t> speakers;      // true speaker index per segment
  std::vector<Embedding> prototypes;
  Diarization reference;
};

// Each turn is cut into 1.5 s windows at 0.75 s shift; each window carries
// its speaker's prototype (random orthonormal, 128-dim) plus N(0, sigma^2)
// noise per coordinate, sigma = spec.noise_sigma.
EmbeddingStream gen_embedding_stream(const SynthSpec& spec);

struct AudioConversation {
  AudioBuffer audio;
  Diarization reference;
};

inline constexpr std::size_t kMaxToneSpeakers = 8;

// Fundamental (Hz) of tone speaker `index`; harmonics 1..3 at amplitudes
// 1, 1/2, 1/4 scaled to a peak of 0.3.
double tone_fundamental(std::size_t index);

// Each speaker's tone gated by its turns (10 ms raised-cosine ramps), plus
// optional white Gaussian noise of spec.noise_sigma.
AudioConversation gen_audio_conversation(const SynthSpec& spec, const std::string& recording_id = "synth");

// 128 bands of 31.25 Hz over 0-4 kHz, from 64 ms Hann-windowed power spectra,
// with the band mean removed.
std::vector<double> band_energy(const AudioBuffer& audio, std::size_t center, std::size_t window);

// Embedding: mean band energy over 64 ms frames at 32 ms hop, cubed so the
// dominant speaker of the window prevails, mean-removed and unit-normalized.
class ToneEmbedder : public SpeakerEmbedder {
 public:
  Embedding embed(const AudioBuffer& audio) const override;
};

// Per 10 ms frame: sigmoid(gain * (cos(band_energy, target) - offset)) with
// the 64 ms analysis window centred on the 25 ms frame.
class ToneTargetDetector : public TargetDetector {
 public:
  explicit ToneTargetDetector(double gain = 20.0, double offset = 0.4) : gain_(gain), offset_(offset) {}
  std::vector<double> track(const AudioBuffer& audio, const Embedding& target) const override;

 private:
  double gain_;
  double offset_;
};

// Sequences of noisy prototype embeddings with speaker labels, for training
// and checking the pair scorer. The first n_speakers positions cover every
// speaker once; the rest are drawn uniformly. Prototypes are the rows of a
// fresh random rotation per sequence, or the standard basis vectors e_1..e_n
// shared by all sequences when `shared_prototypes` is set.
std::vector<V2sSequence> gen_v2s_sequences(std::size_t n_sequences, std::size_t length, std::size_t n_speakers,
                                           double sigma, std::uint64_t seed, std::size_t dim = kEmbeddingDim,
                                           bool shared_prototypes = false);

// Writes <stem>.wav, <stem>.rttm and <stem>.lab (reference speech, "<start> <end>").
void write_synth_case(const std::filesystem::path& dir, const std::string& stem, const AudioConversation& conv);

}  // namespace diarkit
