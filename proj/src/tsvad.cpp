// src/tsvad.cpp
#include "diarkit/tsvad.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "diarkit/error.hpp"

namespace diarkit {

void SpeakerTracks::validate() const {
  if (speakers.size() != probs.size()) throw ShapeError("one track per speaker required");
  for (const auto& p : probs) {
    if (p.size() != frames()) throw ShapeError("speaker tracks differ in length");
    for (double v : p)
      if (!(v >= 0.0 && v <= 1.0)) throw NumericError("track value outside [0, 1]");
  }
}

std::vector<Embedding> extract_target_embeddings(const AudioBuffer& audio,
                                                 const std::vector<std::vector<Segment>>& regions,
                                                 const SpeakerEmbedder& embedder, double max_s, double min_s) {
  const auto sr = static_cast<double>(audio.sample_rate);
  const auto max_samples = static_cast<std::size_t>(std::lround(max_s * sr));
  std::vector<Embedding> out;
  for (std::size_t k = 0; k < regions.size(); ++k) {
    auto segs = regions[k];
    std::sort(segs.begin(), segs.end(), [](const Segment& a, const Segment& b) { return a.start < b.start; });
    AudioBuffer joined;
    joined.sample_rate = audio.sample_rate;
    for (const auto& s : segs) {
      const auto b = static_cast<std::size_t>(std::clamp<long>(std::lround(s.start * sr), 0, static_cast<long>(audio.samples.size())));
      const auto e = static_cast<std::size_t>(std::clamp<long>(std::lround(s.end * sr), 0, static_cast<long>(audio.samples.size())));
      if (e <= b) continue;
      const std::size_t take = std::min(e - b, max_samples - joined.samples.size());
      joined.samples.insert(joined.samples.end(), audio.samples.begin() + static_cast<std::ptrdiff_t>(b),
                            audio.samples.begin() + static_cast<std::ptrdiff_t>(b + take));
      if (joined.samples.size() >= max_samples) break;
    }
    if (static_cast<double>(joined.samples.size()) < min_s * sr - 0.5)
      throw InsufficientSpeechError("speaker " + std::to_string(k) + " has " +
                                    std::to_string(static_cast<double>(joined.samples.size()) / sr) +
                                    " s of speech; at least " + std::to_string(min_s) + " s needed");
    out.push_back(embedder.embed(joined));
  }
  return out;
}

SpeakerTracks run_tsvad(const TargetDetector& detector, const AudioBuffer& audio,
                        const std::vector<Embedding>& targets, std::vector<std::string> speaker_ids,
                        std::size_t threads) {
  if (targets.empty()) throw PreconditionError("run_tsvad needs at least one target");
  if (speaker_ids.empty())
    for (std::size_t k = 0; k < targets.size(); ++k) speaker_ids.push_back("spk" + std::to_string(k + 1));
  if (speaker_ids.size() != targets.size()) throw ShapeError("one speaker id per target required");

  SpeakerTracks tracks;
  tracks.speakers = std::move(speaker_ids);
  tracks.probs.resize(targets.size());
  threads = std::clamp<std::size_t>(threads, 1, targets.size());
  if (threads == 1) {
    for (std::size_t k = 0; k < targets.size(); ++k) tracks.probs[k] = detector.track(audio, targets[k]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(targets.size());
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t k = t; k < targets.size(); k += threads) {
          try {
            tracks.probs[k] = detector.track(audio, targets[k]);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  tracks.validate();
  return tracks;
}

std::vector<double> median_filter(std::span<const double> x, std::size_t taps) {
  if (taps == 0 || taps % 2 == 0) throw ParameterError("median filter needs an odd number of taps");
  const auto n = static_cast<long>(x.size());
  const auto half = static_cast<long>(taps / 2);
  std::vector<double> out(x.size()), window(taps);
  auto reflect = [n](long j) {
    if (n == 1) return 0L;
    const long period = 2 * (n - 1);
    j %= period;
    if (j < 0) j += period;
    return j < n ? j : period - j;
  };
  for (long i = 0; i < n; ++i) {
    for (long k = -half; k <= half; ++k) window[static_cast<std::size_t>(k + half)] = x[static_cast<std::size_t>(reflect(i + k))];
    std::nth_element(window.begin(), window.begin() + half, window.end());
    out[static_cast<std::size_t>(i)] = window[static_cast<std::size_t>(half)];
  }
  return out;
}

namespace {

std::vector<Segment> frames_to_segments(const std::vector<bool>& active, double shift) {
  std::vector<Segment> out;
  for (std::size_t t = 0; t < active.size();) {
    if (!active[t]) {
      ++t;
      continue;
    }
    std::size_t e = t;
    while (e < active.size() && active[e]) ++e;
    out.push_back({static_cast<double>(t) * shift, static_cast<double>(e) * shift});
    t = e;
  }
  return out;
}

std::vector<bool> speech_frames(const std::vector<Segment>& speech, std::size_t frames, double shift) {
  std::vector<bool> mask(frames, false);
  for (const auto& s : speech) {
    const long b = std::max(0L, std::lround(s.start / shift));
    const long e = std::min(static_cast<long>(frames), std::lround(s.end / shift));
    for (long t = b; t < e; ++t) mask[static_cast<std::size_t>(t)] = true;
  }
  return mask;
}

}  // namespace

Diarization postprocess(const SpeakerTracks& tracks, const std::vector<Segment>& speech, const PostprocessConfig& cfg,
                        const std::string& recording_id) {
  tracks.validate();
  if (cfg.median_taps == 0 || cfg.median_taps % 2 == 0)
    throw ParameterError("median filter needs an odd number of taps");
  const std::size_t n_spk = tracks.probs.size(), frames = tracks.frames();
  std::vector<std::vector<double>> smooth(n_spk);
  for (std::size_t k = 0; k < n_spk; ++k) smooth[k] = median_filter(tracks.probs[k], cfg.median_taps);

  const auto in_speech = speech_frames(speech, frames, tracks.frame_shift_s);
  std::vector<std::vector<bool>> active(n_spk, std::vector<bool>(frames, false));
  for (std::size_t t = 0; t < frames; ++t) {
    if (!in_speech[t] || n_spk == 0) continue;
    bool any = false;
    std::size_t best = 0;
    for (std::size_t k = 0; k < n_spk; ++k) {
      if (smooth[k][t] >= cfg.threshold) {
        active[k][t] = true;
        any = true;
      }
      if (smooth[k][t] > smooth[best][t]) best = k;
    }
    if (!any) active[best][t] = true;
  }

  Diarization d;
  d.recording_id = recording_id;
  for (std::size_t k = 0; k < n_spk; ++k)
    for (const auto& s : frames_to_segments(active[k], tracks.frame_shift_s)) d.turns.push_back({s, tracks.speakers[k]});
  return d.normalized();
}

std::vector<std::vector<bool>> diarization_frames(const Diarization& d, const std::vector<std::string>& speakers,
                                                  std::size_t frames, double frame_shift_s) {
  std::vector<std::vector<bool>> out(speakers.size(), std::vector<bool>(frames, false));
  for (const auto& turn : d.turns) {
    const auto it = std::find(speakers.begin(), speakers.end(), turn.speaker);
    if (it == speakers.end()) continue;
    auto& row = out[static_cast<std::size_t>(it - speakers.begin())];
    const long b = std::max(0L, std::lround(turn.segment.start / frame_shift_s));
    const long e = std::min(static_cast<long>(frames), std::lround(turn.segment.end / frame_shift_s));
    for (long t = b; t < e; ++t) row[static_cast<std::size_t>(t)] = true;
  }
  return out;
}

RoundsResult run_rounds(const AudioBuffer& audio, const Diarization& initial, const std::vector<Segment>& speech,
                        const TargetDetector& detector, const SpeakerEmbedder& embedder, const RoundsConfig& cfg) {
  if (cfg.max_rounds == 0) throw ParameterError("max_rounds must be at least 1");
  const auto speakers = initial.speakers();
  if (speakers.empty()) throw PreconditionError("initial diarization has no speakers");

  auto regions_of = [&](const Diarization& d) {
    std::vector<std::vector<Segment>> regions(speakers.size());
    for (const auto& t : d.normalized().turns) {
      const auto it = std::find(speakers.begin(), speakers.end(), t.speaker);
      if (it != speakers.end()) regions[static_cast<std::size_t>(it - speakers.begin())].push_back(t.segment);
    }
    return regions;
  };

  RoundsResult result;
  result.diarization = initial.normalized();
  result.status = "max_rounds";
  std::vector<std::vector<bool>> prev_frames;
  for (std::size_t round = 1; round <= cfg.max_rounds; ++round) {
    std::vector<Embedding> targets;
    try {
      targets = extract_target_embeddings(audio, regions_of(result.diarization), embedder, cfg.target_max_s);
    } catch (const InsufficientSpeechError&) {
      if (round == 1) throw;
      result.status = "empty_speaker_fallback";
      break;
    }
    const auto tracks = run_tsvad(detector, audio, targets, speakers, cfg.threads);
    Diarization out = postprocess(tracks, speech, cfg.post, initial.recording_id);

    const auto frames = diarization_frames(out, speakers, tracks.frames(), tracks.frame_shift_s);
    const bool empty_speaker = std::any_of(frames.begin(), frames.end(), [](const std::vector<bool>& row) {
      return std::find(row.begin(), row.end(), true) == row.end();
    });
    if (empty_speaker) {
      if (round == 1) {
        // Nothing better to fall back to than the initial labelling.
        result.rounds = round;
        result.history.push_back(out);
      }
      result.status = "empty_speaker_fallback";
      break;
    }

    result.diarization = out;
    result.rounds = round;
    result.history.push_back(out);
    if (round > 1 && frames == prev_frames) {
      result.converged = true;
      result.status = "ok";
      break;
    }
    prev_frames = frames;
  }
  return result;
}

}  // namespace diarkit
