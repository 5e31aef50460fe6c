// tests/test_pipeline.cpp
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "diarkit/error.hpp"
#include "diarkit/eval.hpp"
#include "diarkit/pipeline.hpp"
#include "diarkit/synth.hpp"
#include "diarkit/vad.hpp"

namespace diarkit {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("diarkit_test_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<Segment> reference_speech(const Diarization& d) {
  std::vector<Segment> s;
  for (const auto& t : d.turns) s.push_back(t.segment);
  return merge_segments(s);
}

RunOptions stubs() {
  RunOptions o;
  o.stub_embeddings = true;
  o.stub_vad = true;
  return o;
}

TEST(Config, DefaultsArePublishedConstants) {
  const PipelineConfig c;
  EXPECT_DOUBLE_EQ(c.bandwidth_threshold, 0.07);
  EXPECT_DOUBLE_EQ(c.vad_threshold, 0.5);
  EXPECT_DOUBLE_EQ(c.vad_window_s, 4.0);
  EXPECT_DOUBLE_EQ(c.vad_shift_s, 2.0);
  EXPECT_DOUBLE_EQ(c.ncts_window_s, 1.5);
  EXPECT_DOUBLE_EQ(c.ncts_shift_s, 0.25);
  EXPECT_DOUBLE_EQ(c.cts_window_s, 0.5);
  EXPECT_DOUBLE_EQ(c.cts_shift_s, 0.25);
  EXPECT_DOUBLE_EQ(c.merge_threshold, 0.6);
  EXPECT_DOUBLE_EQ(c.ahc_stop_threshold, 0.6);
  EXPECT_DOUBLE_EQ(c.overlap_threshold, 0.0);
  EXPECT_DOUBLE_EQ(c.tsvad_threshold, 0.65);
  EXPECT_EQ(c.median_taps, 11u);
  EXPECT_DOUBLE_EQ(c.target_max_s, 8.0);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParseSetAndRoundTrip) {
  const auto c = PipelineConfig::parse("# comment\n\nmerge_threshold = 0.7\nworkers=3\nv2s_weights=/tmp/x.nnw\n");
  EXPECT_DOUBLE_EQ(c.merge_threshold, 0.7);
  EXPECT_EQ(c.workers, 3u);
  EXPECT_EQ(c.v2s_weights, "/tmp/x.nnw");
  const auto again = PipelineConfig::parse(c.to_text());
  EXPECT_EQ(again.to_text(), c.to_text());
  EXPECT_EQ(PipelineConfig::keys().size(), 29u);
  for (const auto& k : PipelineConfig::keys()) EXPECT_NE(c.to_text().find(k + "="), std::string::npos) << k;
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(PipelineConfig::parse("no_such_key=1\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse("merge_threshold=abc\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::parse("just a line\n"), ConfigError);
  PipelineConfig c;
  c.median_taps = 10;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PipelineConfig{};
  c.affinity = "square";
  EXPECT_THROW(c.validate(), ConfigError);
  c = PipelineConfig{};
  c.workers = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Models, MissingWeightsAreConfigErrors) {
  const PipelineConfig c;
  EXPECT_THROW(load_models(c, RunOptions{}, true), ConfigError);
  RunOptions only_vad_stub;
  only_vad_stub.stub_vad = true;
  EXPECT_THROW(load_models(c, only_vad_stub, true), ConfigError);
  const auto task1 = load_models(c, RunOptions{.stub_embeddings = true}, false);
  EXPECT_EQ(task1.vad, nullptr);
  EXPECT_EQ(task1.vad_kind, "none");
}

TEST(Batch, EmptyDirectoryGivesEmptyReport) {
  const auto dir = scratch("empty");
  const auto inputs = collect_inputs(dir);
  EXPECT_TRUE(inputs.empty());
  const auto r = run_pipeline(inputs, dir / "out", PipelineConfig{}, RunOptions{});
  EXPECT_TRUE(r.reports.empty());
  EXPECT_EQ(r.failures, 0u);
  EXPECT_THROW(collect_inputs(dir / "missing"), InputError);
}

TEST(Pipeline, SyntheticTelephoneCallWithStubs) {
  SynthSpec spec;
  spec.n_speakers = 2;
  spec.duration_s = 60.0;
  spec.seed = 3;
  const auto conv = gen_audio_conversation(spec, "call");
  const auto models = load_models(PipelineConfig{}, stubs(), false);
  const auto res = diarize_recording(conv.audio, "call", reference_speech(conv.reference), models, PipelineConfig{});
  EXPECT_EQ(res.report["class"], "CTS");
  EXPECT_EQ(res.report["mode"], "task1");
  EXPECT_EQ(res.report["vad_model_loaded"], false);
  EXPECT_EQ(res.diarization.speakers().size(), 2u);
  const auto der = compute_der(conv.reference, res.diarization);
  EXPECT_LT(der.der, 0.05) << "miss " << der.miss << " fa " << der.false_alarm << " conf " << der.confusion;
  EXPECT_GE(res.report["rounds"].get<int>(), 1);
  RecordProperty("der", std::to_string(der.der));
}

TEST(Pipeline, TaskModesDifferOnlyInSpeechSource) {
  SynthSpec spec;
  spec.duration_s = 30.0;
  spec.seed = 5;
  const auto conv = gen_audio_conversation(spec, "call");
  const PipelineConfig cfg;
  const auto models = load_models(cfg, stubs(), true);
  const auto task2 = diarize_recording(conv.audio, "call", std::nullopt, models, cfg);
  EXPECT_EQ(task2.report["mode"], "task2");
  EXPECT_EQ(task2.report["vad_source"], "energy");
  // Feed task 1 exactly the mask the detector produced.
  const auto work = resample_to_8k(conv.audio);
  const auto speech = binarize(predict_speech(*models.vad, work, {cfg.vad_window_s, cfg.vad_shift_s}),
                               {cfg.vad_threshold, cfg.vad_min_dur_s, cfg.vad_min_gap_s});
  const auto task1 = diarize_recording(conv.audio, "call", speech, models, cfg);
  EXPECT_EQ(task1.report["vad_source"], "reference");
  EXPECT_EQ(emit_rttm(to_rttm(task1.diarization)), emit_rttm(to_rttm(task2.diarization)));
}

TEST(Batch, FailuresAreIsolatedAndOutputDeterministic) {
  const auto dir = scratch("batch");
  for (std::uint64_t seed : {1u, 2u}) {
    SynthSpec spec;
    spec.duration_s = 20.0;
    spec.seed = seed;
    write_synth_case(dir, "case" + std::to_string(seed), gen_audio_conversation(spec, "case" + std::to_string(seed)));
  }
  std::ofstream(dir / "broken.wav") << "not a wav file";
  PipelineConfig cfg;
  RunOptions opts = stubs();
  opts.vad_dir = dir;
  const auto inputs = collect_inputs(dir);
  ASSERT_EQ(inputs.size(), 3u);
  const auto one = run_pipeline(inputs, dir / "w1", cfg, opts);
  EXPECT_EQ(one.failures, 1u);
  EXPECT_EQ(one.reports[0]["status"], "error");
  EXPECT_EQ(one.reports[1]["status"], "ok");
  cfg.workers = 2;
  const auto two = run_pipeline(inputs, dir / "w2", cfg, opts);
  EXPECT_EQ(two.failures, 1u);
  for (const auto* stem : {"case1.rttm", "case2.rttm"}) {
    std::ifstream a(dir / "w1" / stem), b(dir / "w2" / stem);
    const std::string ta((std::istreambuf_iterator<char>(a)), {}), tb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_FALSE(ta.empty());
    EXPECT_EQ(ta, tb);
  }
}

}  // namespace
}  // namespace diarkit
