// include/diarkit/segmenter.hpp
#pragma once

#include <vector>

#include "diarkit/types.hpp"

namespace diarkit {

struct UniformSegmentation {
  double window_s;
  double shift_s;
};

inline constexpr UniformSegmentation kNctsInference{1.5, 0.25};
inline constexpr UniformSegmentation kNctsTraining{1.5, 0.75};
inline constexpr UniformSegmentation kCtsInference{0.5, 0.25};
inline constexpr double kMergeThreshold = 0.6;

// Windows at start + k * shift while they fit inside each region; a region
// shorter than the window is kept whole. Output sorted by start.
std::vector<Segment> uniform_segments(const std::vector<Segment>& speech, double window_s, double shift_s);
inline std::vector<Segment> uniform_segments(const std::vector<Segment>& speech, UniformSegmentation u) {
  return uniform_segments(speech, u.window_s, u.shift_s);
}

// How a merged segment's embedding is formed.
enum class MergeMean {
  kPair,     // unweighted mean of the two merged embeddings
  kMembers,  // mean over every original segment the merged one contains
};

// Repeatedly merges the adjacent pair with the highest cosine similarity
// above `threshold` (leftmost on ties). The merged segment spans both; its
// embedding follows `mean`.
std::vector<EmbeddedSegment> recursive_merge(std::vector<EmbeddedSegment> segs,
                                             double threshold = kMergeThreshold,
                                             MergeMean mean = MergeMean::kPair);

}  // namespace diarkit
