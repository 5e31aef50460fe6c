// tests/test_vad.cpp
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "diarkit/error.hpp"
#include "diarkit/rng.hpp"
#include "diarkit/vad.hpp"

namespace diarkit {
namespace {

AudioBuffer silence(double seconds) {
  AudioBuffer a;
  a.samples.assign(static_cast<std::size_t>(seconds * 16000), 0.0f);
  return a;
}

class ConstantDetector : public SpeechDetector {
 public:
  explicit ConstantDetector(double p) : p_(p) {}
  std::vector<double> predict(const FeatureMatrix& w) const override { return std::vector<double>(w.frames, p_); }

 private:
  double p_;
};

// Returns 0.1 * (k + 1) for the k-th window it is asked about.
class WindowIndexDetector : public SpeechDetector {
 public:
  std::vector<double> predict(const FeatureMatrix& w) const override {
    const double v = 0.1 * static_cast<double>(++calls_);
    return std::vector<double>(w.frames, v);
  }

 private:
  mutable int calls_ = 0;
};

TEST(VadWindows, TenSecondsGivesFourWindows) {
  const std::size_t frames = (160000 - 400) / 160 + 1;
  const auto w = vad_windows(frames, 160000, 16000);
  ASSERT_EQ(w.size(), 4u);
  const std::vector<double> starts = {0.0, 2.0, 4.0, 6.0};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(static_cast<double>(w[i].first) * kFrameShift, starts[i]);
    EXPECT_EQ(w[i].second - w[i].first, i < 3 ? 400u : frames - 600u);
  }
  EXPECT_EQ(w.back().second, frames);
  std::size_t covering = 0;
  for (const auto& [b, e] : w) covering += (b <= 500 && 500 < e);
  EXPECT_EQ(covering, 2u);
}

TEST(VadWindows, ShortRecordingGetsOneWindow) {
  const std::size_t frames = (48000 - 400) / 160 + 1;
  const auto w = vad_windows(frames, 48000, 16000);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].first, 0u);
  EXPECT_EQ(w[0].second, frames);
}

TEST(VadWindows, TailWindowIsAnchoredToTheEnd) {
  // 11.3 s: regular windows end at 10 s; one more ends at the last frame.
  const std::size_t samples = 180800, frames = (samples - 400) / 160 + 1;
  const auto w = vad_windows(frames, samples, 16000);
  EXPECT_EQ(w.back().second, frames);
  EXPECT_NEAR(static_cast<double>(w.back().first) * kFrameShift, 11.3 - 4.0, 0.011);
  for (std::size_t i = 1; i < w.size(); ++i) EXPECT_GT(w[i].first, w[i - 1].first);
}

TEST(PredictSpeech, OverlapFramesAverageTheirWindows) {
  const WindowIndexDetector det;
  const auto audio = silence(10.0);
  const auto mask = predict_speech(det, audio);
  const auto w = vad_windows(mask.probs.size(), audio.samples.size(), 16000);
  for (std::size_t t = 0; t < mask.probs.size(); ++t) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < w.size(); ++k)
      if (w[k].first <= t && t < w[k].second) sum += 0.1 * static_cast<double>(k + 1), ++n;
    ASSERT_GT(n, 0);
    EXPECT_DOUBLE_EQ(mask.probs[t], sum / n) << t;
  }
  EXPECT_DOUBLE_EQ(mask.probs[500], (0.2 + 0.3) / 2.0);
}

TEST(PredictSpeech, ConstantOutputGivesConstantMask) {
  const ConstantDetector det(0.37);
  const auto mask = predict_speech(det, silence(7.3));
  for (double p : mask.probs) EXPECT_DOUBLE_EQ(p, 0.37);
  EXPECT_THROW(predict_speech(det, AudioBuffer{}), EmptyInputError);
}

TEST(Binarize, Examples) {
  SpeechMask all;
  all.probs.assign(200, 0.9);
  const auto one = binarize(all);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].start, 0.0);
  EXPECT_DOUBLE_EQ(one[0].end, 2.0);

  SpeechMask none;
  none.probs.assign(200, 0.1);
  EXPECT_TRUE(binarize(none).empty());

  SpeechMask gap;
  gap.probs.assign(110, 0.1);
  for (std::size_t t = 0; t < 50; ++t) gap.probs[t] = 0.9;
  for (std::size_t t = 60; t < 110; ++t) gap.probs[t] = 0.9;
  const auto two = binarize(gap);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_NEAR(two[0].end, 0.5, 1e-12);
  EXPECT_NEAR(two[1].start, 0.6, 1e-12);
}

TEST(Binarize, ShortGapsBridgedAndShortRunsDropped) {
  SpeechMask m;
  m.probs.assign(100, 0.0);
  for (std::size_t t = 0; t < 30; ++t) m.probs[t] = 0.8;
  for (std::size_t t = 35; t < 60; ++t) m.probs[t] = 0.8;  // 5-frame gap: bridged
  for (std::size_t t = 80; t < 85; ++t) m.probs[t] = 0.8;  // 5 frames: dropped
  const auto s = binarize(m);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].start, 0.0, 1e-12);
  EXPECT_NEAR(s[0].end, 0.6, 1e-12);
}

TEST(Binarize, OutputIsSortedDisjointAndMonotoneInThreshold) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    SpeechMask m;
    m.probs.resize(300 + rng.index(300));
    double v = rng.uniform();
    for (auto& p : m.probs) {
      v = std::clamp(v + rng.uniform(-0.2, 0.2), 0.0, 1.0);
      p = v;
    }
    const double duration = static_cast<double>(m.probs.size()) * kFrameShift;
    double prev_total = std::numeric_limits<double>::infinity();
    for (double thr : {0.2, 0.4, 0.5, 0.6, 0.8}) {
      const auto segs = binarize(m, {thr, 0.0, 0.0});
      double total = 0.0;
      for (std::size_t i = 0; i < segs.size(); ++i) {
        EXPECT_GE(segs[i].start, 0.0);
        EXPECT_LE(segs[i].end, duration + 1e-9);
        EXPECT_LT(segs[i].start, segs[i].end);
        if (i > 0) EXPECT_GT(segs[i].start, segs[i - 1].end);
        total += segs[i].duration();
      }
      EXPECT_LE(total, prev_total + 1e-9);
      prev_total = total;
      for (const auto& s : binarize(m, {thr, 0.1, 0.1})) {
        EXPECT_GE(s.start, 0.0);
        EXPECT_LE(s.end, duration + 1e-9);
      }
    }
  }
}

TEST(EnergyDetector, SeparatesToneFromSilence) {
  AudioBuffer a = silence(4.0);
  for (std::size_t n = 16000; n < 48000; ++n)
    a.samples[n] = static_cast<float>(0.3 * std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(n) / 16000.0));
  const EnergySpeechDetector det;
  const auto segs = binarize(predict_speech(det, a));
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_NEAR(segs[0].start, 1.0, 0.03);
  EXPECT_NEAR(segs[0].end, 3.0, 0.03);
}

TEST(VadFiles, ParseFormatAndFrames) {
  const auto segs = parse_vad_segments("# comment\n0.5 1.25\n\n2 3.5\n");
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[1], (Segment{2.0, 3.5}));
  EXPECT_EQ(format_vad_segments("rec", segs), "rec 0.500 1.250\nrec 2.000 3.500\n");
  EXPECT_THROW(parse_vad_segments("1.0\n"), ParseError);
  EXPECT_THROW(parse_vad_segments("0 1\n2 1\n"), ParseError);
  try {
    parse_vad_segments("0 1\n0 1 x\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  const auto mask = segments_to_frames(segs, 400);
  EXPECT_FALSE(mask[49]);
  EXPECT_TRUE(mask[50]);
  EXPECT_TRUE(mask[124]);
  EXPECT_FALSE(mask[125]);
  EXPECT_TRUE(mask[349]);
  EXPECT_FALSE(mask[350]);
}

TEST(VadFiles, MergeSegments) {
  const auto m = merge_segments({{3, 4}, {0, 1}, {1, 2}, {3.5, 5}, {7, 7}});
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (Segment{0, 2}));
  EXPECT_EQ(m[1], (Segment{3, 5}));
}

}  // namespace
}  // namespace diarkit
