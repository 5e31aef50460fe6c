// src/segmenter.cpp
#include "diarkit/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include "diarkit/cluster.hpp"
#include "diarkit/error.hpp"

namespace diarkit {

std::vector<Segment> uniform_segments(const std::vector<Segment>& speech, double window_s, double shift_s) {
  if (!(window_s > 0.0) || !(shift_s > 0.0) || shift_s > window_s)
    throw ParameterError("uniform segmentation needs window > 0 and 0 < shift <= window");
  constexpr double kEps = 1e-9;
  std::vector<Segment> out;
  for (const auto& region : speech) {
    if (region.end - region.start < window_s - kEps) {
      if (region.end > region.start) out.push_back(region);
      continue;
    }
    for (std::size_t k = 0;; ++k) {
      const double start = region.start + static_cast<double>(k) * shift_s;
      if (start + window_s > region.end + kEps) break;
      out.push_back({start, start + window_s});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Segment& a, const Segment& b) { return a.start < b.start; });
  return out;
}

std::vector<EmbeddedSegment> recursive_merge(std::vector<EmbeddedSegment> segs, double threshold, MergeMean mean) {
  if (segs.size() < 2) return segs;
  std::vector<double> members(segs.size(), 1.0);
  std::vector<double> sim(segs.size() - 1);
  for (std::size_t i = 0; i + 1 < segs.size(); ++i)
    sim[i] = cosine_similarity(segs[i].embedding, segs[i + 1].embedding);

  while (!sim.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < sim.size(); ++i)
      if (sim[i] > sim[best]) best = i;
    if (!(sim[best] > threshold)) break;

    auto& a = segs[best];
    const auto& b = segs[best + 1];
    a.segment.end = b.segment.end;
    const double wa = mean == MergeMean::kPair ? 0.5 : members[best] / (members[best] + members[best + 1]);
    for (std::size_t j = 0; j < a.embedding.size(); ++j) a.embedding[j] = wa * a.embedding[j] + (1.0 - wa) * b.embedding[j];
    members[best] += members[best + 1];
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(best) + 1);
    sim.erase(sim.begin() + static_cast<std::ptrdiff_t>(best));
    if (best > 0) sim[best - 1] = cosine_similarity(segs[best - 1].embedding, a.embedding);
    if (best < sim.size()) sim[best] = cosine_similarity(a.embedding, segs[best + 1].embedding);
  }
  return segs;
}

}  // namespace diarkit
