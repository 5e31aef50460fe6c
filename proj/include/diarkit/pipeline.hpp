// include/diarkit/pipeline.hpp
//
// End-to-end orchestration: bandwidth partition, then either the wide-band
// path (VAD -> 1.5 s segments -> embeddings -> pair scoring -> spectral
// clustering) or the telephone path (8 kHz -> VAD -> 0.5 s segments ->
// merge -> AHC -> overlap assignment -> TSVAD rounds), producing RTTM and a
// JSON-lines run report.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diarkit/dsp.hpp"
#include "diarkit/models.hpp"
#include "diarkit/types.hpp"

namespace diarkit {

struct PipelineConfig {
  double bandwidth_threshold = 0.07;
  double bandwidth_horizon_s = 100.0;
  double vad_threshold = 0.5;
  double vad_window_s = 4.0;
  double vad_shift_s = 2.0;
  double vad_min_dur_s = 0.1;
  double vad_min_gap_s = 0.1;
  double ncts_window_s = 1.5;
  double ncts_shift_s = 0.25;
  double cts_window_s = 0.5;
  double cts_shift_s = 0.25;
  double merge_threshold = 0.6;
  std::string merge_mean = "pair";  // merged-segment embedding: pair | members
  double ahc_stop_threshold = 0.6;
  double overlap_threshold = 0.0;
  double tsvad_threshold = 0.65;
  std::size_t median_taps = 11;
  std::size_t tsvad_max_rounds = 4;
  double target_max_s = 8.0;
  std::size_t max_speakers = 8;
  std::size_t kmeans_restarts = 20;
  std::string affinity = "clip";  // cosine-to-affinity mapping without a pair scorer: clip | shift
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string vad_weights;
  std::string embed16k_weights;
  std::string embed8k_weights;
  std::string v2s_weights;
  std::string tsvad_weights;

  // Applies one key=value assignment. Throws ConfigError on unknown keys or
  // unparsable values.
  void set(const std::string& key, const std::string& value);
  // Flat "key=value" text; '#' starts a comment; blank lines ignored.
  static PipelineConfig parse(const std::string& text);
  static PipelineConfig load(const std::filesystem::path& path);
  std::string to_text() const;
  static std::vector<std::string> keys();
  // Throws ConfigError when a value is out of range.
  void validate() const;
};

// Runtime switches that are not part of the stored configuration.
struct RunOptions {
  bool stub_embeddings = false;  // tone embedder, tone target detector, cosine affinity
  bool stub_vad = false;         // energy detector instead of the VAD network
  std::optional<std::filesystem::path> vad_dir;  // task 1: <stem>.lab reference speech per recording
};

// Read-only model set shared by all workers.
struct ModelSet {
  std::shared_ptr<const SpeechDetector> vad;
  std::string vad_kind = "none";  // none | network | energy
  std::shared_ptr<const SpeakerEmbedder> embed16k;
  std::shared_ptr<const SpeakerEmbedder> embed8k;
  std::shared_ptr<const PairScorer> v2s;  // null: cosine affinity
  std::shared_ptr<const TargetDetector> tsvad;
};

// Loads what the run needs. `need_vad` is false in task-1 mode, in which case
// no VAD model is loaded. Throws ConfigError for missing weight paths unless
// stubs were requested.
ModelSet load_models(const PipelineConfig& cfg, const RunOptions& opts, bool need_vad);

struct RecordingResult {
  Diarization diarization;
  nlohmann::ordered_json report;
};

// Diarizes one recording. `speech` supplies reference speech regions (task 1);
// otherwise the model set's VAD is used.
RecordingResult diarize_recording(const AudioBuffer& audio, const std::string& recording_id,
                                  const std::optional<std::vector<Segment>>& speech, const ModelSet& models,
                                  const PipelineConfig& cfg);

// Telephone path on 8 kHz audio with known speech: returns the clustering
// result before TSVAD (speakers "spk01", "spk02").
Diarization cts_initial_diarization(const AudioBuffer& audio8k, const std::string& recording_id,
                                    const std::vector<Segment>& speech, const SpeakerEmbedder& embedder,
                                    const PipelineConfig& cfg, nlohmann::ordered_json* report = nullptr);

// Writes `text` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

// .wav files under `input` (a file or a directory, non-recursive), sorted.
std::vector<std::filesystem::path> collect_inputs(const std::filesystem::path& input);

struct BatchResult {
  std::vector<nlohmann::ordered_json> reports;  // in input order
  std::size_t failures = 0;
};

// Processes every input on cfg.workers threads, writing <out_dir>/<stem>.rttm
// per recording. Failures are recorded in the report and do not stop the batch.
BatchResult run_pipeline(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir,
                         const PipelineConfig& cfg, const RunOptions& opts);

}  // namespace diarkit
