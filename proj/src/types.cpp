// src/types.cpp
#include "diarkit/types.hpp"

#include <algorithm>
#include <map>

namespace diarkit {

std::vector<std::string> Diarization::speakers() const {
  std::vector<std::string> out;
  for (const auto& t : turns)
    if (std::find(out.begin(), out.end(), t.speaker) == out.end()) out.push_back(t.speaker);
  std::sort(out.begin(), out.end());
  return out;
}

double Diarization::speaker_time(const std::string& speaker) const {
  double total = 0.0;
  for (const auto& t : normalized().turns)
    if (t.speaker == speaker) total += t.segment.duration();
  return total;
}

Diarization Diarization::normalized() const {
  std::map<std::string, std::vector<Segment>> per_speaker;
  for (const auto& t : turns)
    if (t.segment.end > t.segment.start) per_speaker[t.speaker].push_back(t.segment);
  Diarization out;
  out.recording_id = recording_id;
  for (auto& [spk, segs] : per_speaker) {
    std::sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) { return a.start < b.start; });
    Segment cur = segs.front();
    for (std::size_t i = 1; i < segs.size(); ++i) {
      if (segs[i].start <= cur.end) {
        cur.end = std::max(cur.end, segs[i].end);
      } else {
        out.turns.push_back({cur, spk});
        cur = segs[i];
      }
    }
    out.turns.push_back({cur, spk});
  }
  std::sort(out.turns.begin(), out.turns.end(), [](const Turn& a, const Turn& b) {
    return a.segment.start < b.segment.start || (a.segment.start == b.segment.start && a.speaker < b.speaker);
  });
  return out;
}

}  // namespace diarkit
