// src/vad.cpp
#include "diarkit/vad.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "diarkit/error.hpp"
#include "diarkit/layers.hpp"

namespace diarkit {

std::vector<std::pair<std::size_t, std::size_t>> vad_windows(std::size_t frames, std::size_t num_samples,
                                                             int sample_rate, const VadWindowing& w) {
  if (w.window_s <= 0.0 || w.shift_s <= 0.0) throw ParameterError("VAD window and shift must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (frames == 0) return out;
  const auto win = static_cast<std::size_t>(std::lround(w.window_s / kFrameShift));
  const auto shift = static_cast<std::size_t>(std::lround(w.shift_s / kFrameShift));
  const auto win_samples = static_cast<std::size_t>(std::lround(w.window_s * sample_rate));
  if (num_samples <= win_samples || frames <= win) {
    out.emplace_back(0, frames);
    return out;
  }
  std::size_t s = 0;
  for (; s + win <= frames; s += shift) out.emplace_back(s, s + win);
  if (out.back().second < frames) {
    const auto hop = static_cast<std::size_t>(std::lround(kFrameShift * sample_rate));
    const std::size_t tail = std::min(frames - 1, (num_samples - win_samples + hop - 1) / hop);
    if (tail > out.back().first) out.emplace_back(tail, frames);
    else out.back().second = frames;
  }
  return out;
}

SpeechMask predict_speech(const SpeechDetector& detector, const AudioBuffer& audio, const VadWindowing& windowing) {
  if (audio.samples.empty()) throw EmptyInputError("empty audio");
  const FeatureMatrix feats = log_mel(audio, detector.n_mels());
  const auto windows = vad_windows(feats.frames, audio.samples.size(), audio.sample_rate, windowing);

  std::vector<double> sum(feats.frames, 0.0);
  std::vector<int> count(feats.frames, 0);
  for (const auto& [b, e] : windows) {
    const auto probs = detector.predict(feats.rows(b, e));
    if (probs.size() != e - b)
      throw ShapeError("speech detector returned " + std::to_string(probs.size()) + " values for " +
                       std::to_string(e - b) + " frames");
    for (std::size_t t = b; t < e; ++t) {
      sum[t] += probs[t - b];
      ++count[t];
    }
  }
  SpeechMask mask;
  mask.probs.resize(feats.frames);
  for (std::size_t t = 0; t < feats.frames; ++t) mask.probs[t] = std::clamp(sum[t] / count[t], 0.0, 1.0);
  return mask;
}

std::vector<Segment> binarize(const SpeechMask& mask, const BinarizeConfig& cfg) {
  const double shift = mask.frame_shift_s;
  const auto min_gap = static_cast<std::size_t>(std::lround(cfg.min_gap_s / shift));
  const auto min_dur = static_cast<std::size_t>(std::lround(cfg.min_dur_s / shift));

  std::vector<std::pair<std::size_t, std::size_t>> runs;
  const std::size_t n = mask.probs.size();
  for (std::size_t t = 0; t < n;) {
    if (mask.probs[t] < cfg.threshold) {
      ++t;
      continue;
    }
    std::size_t e = t;
    while (e < n && mask.probs[e] >= cfg.threshold) ++e;
    if (!runs.empty() && t - runs.back().second < min_gap) runs.back().second = e;
    else runs.emplace_back(t, e);
    t = e;
  }
  std::vector<Segment> out;
  for (const auto& [b, e] : runs)
    if (e - b >= min_dur) out.push_back({static_cast<double>(b) * shift, static_cast<double>(e) * shift});
  return out;
}

std::vector<double> EnergySpeechDetector::predict(const FeatureMatrix& window) const {
  std::vector<double> out(window.frames);
  for (std::size_t t = 0; t < window.frames; ++t) {
    double e = 0.0;
    for (double v : window.row(t)) e += std::exp(v);
    out[t] = nn::sigmoid(slope_ * (std::log(e) - threshold_));
  }
  return out;
}

std::vector<Segment> merge_segments(std::vector<Segment> segs) {
  std::sort(segs.begin(), segs.end(),
            [](const Segment& a, const Segment& b) { return a.start < b.start || (a.start == b.start && a.end < b.end); });
  std::vector<Segment> out;
  for (const auto& s : segs) {
    if (s.end <= s.start) continue;
    if (!out.empty() && s.start <= out.back().end) out.back().end = std::max(out.back().end, s.end);
    else out.push_back(s);
  }
  return out;
}

std::vector<Segment> parse_vad_segments(std::string_view text) {
  std::vector<Segment> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    Segment s;
    std::string extra;
    if (!(fields >> s.start >> s.end)) throw ParseError(lineno, "expected '<start> <end>'");
    if (fields >> extra) throw ParseError(lineno, "unexpected trailing field '" + extra + "'");
    if (!(s.start >= 0.0) || !(s.end > s.start)) throw ParseError(lineno, "invalid segment bounds");
    out.push_back(s);
  }
  return out;
}

std::vector<Segment> read_vad_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_vad_segments(ss.str());
}

std::string format_vad_segments(const std::string& file_id, const std::vector<Segment>& segs) {
  std::string out;
  char buf[64];
  for (const auto& s : segs) {
    std::snprintf(buf, sizeof(buf), " %.3f %.3f\n", s.start, s.end);
    out += file_id;
    out += buf;
  }
  return out;
}

std::vector<bool> segments_to_frames(const std::vector<Segment>& segs, std::size_t frames, double frame_shift_s) {
  std::vector<bool> mask(frames, false);
  for (const auto& s : segs) {
    const auto b = static_cast<std::size_t>(std::max<long>(0, std::lround(s.start / frame_shift_s)));
    const auto e = std::min<std::size_t>(frames, static_cast<std::size_t>(std::max<long>(0, std::lround(s.end / frame_shift_s))));
    for (std::size_t t = b; t < e; ++t) mask[t] = true;
  }
  return mask;
}

}  // namespace diarkit
