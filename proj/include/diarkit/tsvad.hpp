// include/diarkit/tsvad.hpp
//
// Target-speaker VAD inference for two-party telephone audio: enrol each
// speaker from an initial diarization, track them frame by frame, smooth and
// threshold the tracks, and iterate until the labelling stops changing.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "diarkit/dsp.hpp"
#include "diarkit/models.hpp"
#include "diarkit/types.hpp"

namespace diarkit {

struct SpeakerTracks {
  std::vector<std::string> speakers;
  std::vector<std::vector<double>> probs;  // [speaker][frame], values in [0, 1]
  double frame_shift_s = kFrameShift;

  std::size_t frames() const { return probs.empty() ? 0 : probs.front().size(); }
  // Throws ShapeError on ragged tracks and NumericError on values outside [0, 1].
  void validate() const;
};

inline constexpr double kTargetMaxSeconds = 8.0;
inline constexpr double kTargetMinSeconds = 0.25;
inline constexpr double kTsvadThreshold = 0.65;
inline constexpr std::size_t kMedianTaps = 11;
inline constexpr std::size_t kMaxRounds = 4;

// Per speaker: the speaker's regions in time order, concatenated up to max_s
// seconds, then embedded. Throws InsufficientSpeechError below min_s.
std::vector<Embedding> extract_target_embeddings(const AudioBuffer& audio,
                                                 const std::vector<std::vector<Segment>>& regions,
                                                 const SpeakerEmbedder& embedder, double max_s = kTargetMaxSeconds,
                                                 double min_s = kTargetMinSeconds);

// One detector pass per target. `threads` > 1 runs targets concurrently.
SpeakerTracks run_tsvad(const TargetDetector& detector, const AudioBuffer& audio,
                        const std::vector<Embedding>& targets, std::vector<std::string> speaker_ids = {},
                        std::size_t threads = 1);

// Sliding median with reflection padding (the edge sample is not repeated).
// Throws ParameterError for even or zero `taps`.
std::vector<double> median_filter(std::span<const double> x, std::size_t taps);

struct PostprocessConfig {
  double threshold = kTsvadThreshold;
  std::size_t median_taps = kMedianTaps;
};

// Inside speech: every speaker whose smoothed value reaches the threshold, or
// the single best speaker (lowest index on ties) if none does. Outside speech:
// nobody. Frames t cover [t, t + 1) * frame_shift.
Diarization postprocess(const SpeakerTracks& tracks, const std::vector<Segment>& speech,
                        const PostprocessConfig& cfg = {}, const std::string& recording_id = "");

// Frame-level speaker activity [speaker][frame] for the given speaker order.
std::vector<std::vector<bool>> diarization_frames(const Diarization& d, const std::vector<std::string>& speakers,
                                                  std::size_t frames, double frame_shift_s = kFrameShift);

struct RoundsConfig {
  std::size_t max_rounds = kMaxRounds;
  double target_max_s = kTargetMaxSeconds;
  PostprocessConfig post;
  std::size_t threads = 1;
};

struct RoundsResult {
  Diarization diarization;
  std::size_t rounds = 0;               // rounds executed
  bool converged = false;               // the last round repeated the one before
  std::string status = "ok";            // "ok", "max_rounds" or "empty_speaker_fallback"
  std::vector<Diarization> history;     // output of each executed round
};

// Round r enrols speakers from round r-1's output (round 1 from `initial`),
// tracks and post-processes; iteration stops when a round reproduces the
// previous round's output frame for frame, or after max_rounds. A round that leaves a speaker with no
// frames, or too little speech to enrol, is discarded in favour of the
// previous result.
RoundsResult run_rounds(const AudioBuffer& audio, const Diarization& initial, const std::vector<Segment>& speech,
                        const TargetDetector& detector, const SpeakerEmbedder& embedder,
                        const RoundsConfig& cfg = {});

}  // namespace diarkit
