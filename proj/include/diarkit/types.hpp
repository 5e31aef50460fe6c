// include/diarkit/types.hpp
//
// Value types shared by the pipeline stages.
#pragma once

#include <string>
#include <vector>

namespace diarkit {

using Embedding = std::vector<double>;

inline constexpr std::size_t kEmbeddingDim = 128;
inline constexpr double kFrameShift = 0.010;

// Half-open time interval in seconds.
struct Segment {
  double start = 0.0;
  double end = 0.0;

  double duration() const { return end - start; }
  bool operator==(const Segment&) const = default;
};

struct EmbeddedSegment {
  Segment segment;
  Embedding embedding;
};

struct Turn {
  Segment segment;
  std::string speaker;

  bool operator==(const Turn&) const = default;
};

// Who spoke when, for one recording. Same-speaker turns never overlap once
// normalized; turns of different speakers may.
struct Diarization {
  std::string recording_id;
  std::vector<Turn> turns;

  std::vector<std::string> speakers() const;
  double speaker_time(const std::string& speaker) const;
  // Merges overlapping or touching turns per speaker and sorts by (start, speaker).
  Diarization normalized() const;
};

}  // namespace diarkit
