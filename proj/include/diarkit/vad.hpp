// include/diarkit/vad.hpp
//
// Windowed speech detection with overlap averaging, and binarization of the
// resulting frame mask into speech segments.
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "diarkit/dsp.hpp"
#include "diarkit/models.hpp"
#include "diarkit/types.hpp"

namespace diarkit {

struct SpeechMask {
  std::vector<double> probs;
  double frame_shift_s = kFrameShift;
};

struct VadWindowing {
  double window_s = 4.0;
  double shift_s = 2.0;
};

// Frame ranges [begin, end) the detector is run on. Windows start every
// shift; when they do not reach the last frame, one more window is anchored
// at (duration - window_s). Recordings no longer than one window get a single
// window.
std::vector<std::pair<std::size_t, std::size_t>> vad_windows(std::size_t frames, std::size_t num_samples,
                                                             int sample_rate, const VadWindowing& w = {});

// Each frame's probability is the mean over all windows covering it.
SpeechMask predict_speech(const SpeechDetector& detector, const AudioBuffer& audio,
                          const VadWindowing& windowing = {});

struct BinarizeConfig {
  double threshold = 0.5;
  double min_dur_s = 0.1;
  double min_gap_s = 0.1;
};

// Runs of frames >= threshold; gaps shorter than min_gap are bridged, then
// runs shorter than min_dur are dropped.
std::vector<Segment> binarize(const SpeechMask& mask, const BinarizeConfig& cfg = {});

// Frame-level energy detector for runs without a trained VAD network:
// p = sigmoid(slope * (log(sum of Mel energies) - threshold)).
class EnergySpeechDetector : public SpeechDetector {
 public:
  explicit EnergySpeechDetector(double log_energy_threshold = -12.0, double slope = 2.0)
      : threshold_(log_energy_threshold), slope_(slope) {}
  std::vector<double> predict(const FeatureMatrix& window) const override;

 private:
  double threshold_;
  double slope_;
};

// Sorted, with overlapping or touching segments merged.
std::vector<Segment> merge_segments(std::vector<Segment> segs);

// "<start> <end>" per line; blank lines and '#' comments are skipped.
std::vector<Segment> parse_vad_segments(std::string_view text);
std::vector<Segment> read_vad_file(const std::filesystem::path& path);
// "<file-id> <start> <end>" per line, 3 decimals.
std::string format_vad_segments(const std::string& file_id, const std::vector<Segment>& segs);

// Frame mask (1 inside a segment) of `frames` frames at `frame_shift_s`.
std::vector<bool> segments_to_frames(const std::vector<Segment>& segs, std::size_t frames,
                                     double frame_shift_s = kFrameShift);

}  // namespace diarkit
