// src/pipeline.cpp
#include "diarkit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "diarkit/bandwidth.hpp"
#include "diarkit/cluster.hpp"
#include "diarkit/error.hpp"
#include "diarkit/eval.hpp"
#include "diarkit/segmenter.hpp"
#include "diarkit/synth.hpp"
#include "diarkit/tensor.hpp"
#include "diarkit/tsvad.hpp"
#include "diarkit/vad.hpp"

namespace diarkit {

// ---------------------------------------------------------------------------
// Configuration

namespace {

template <class Config, class F>
void visit_fields(Config& c, F&& f) {
  f("bandwidth_threshold", c.bandwidth_threshold);
  f("bandwidth_horizon_s", c.bandwidth_horizon_s);
  f("vad_threshold", c.vad_threshold);
  f("vad_window_s", c.vad_window_s);
  f("vad_shift_s", c.vad_shift_s);
  f("vad_min_dur_s", c.vad_min_dur_s);
  f("vad_min_gap_s", c.vad_min_gap_s);
  f("ncts_window_s", c.ncts_window_s);
  f("ncts_shift_s", c.ncts_shift_s);
  f("cts_window_s", c.cts_window_s);
  f("cts_shift_s", c.cts_shift_s);
  f("merge_threshold", c.merge_threshold);
  f("merge_mean", c.merge_mean);
  f("ahc_stop_threshold", c.ahc_stop_threshold);
  f("overlap_threshold", c.overlap_threshold);
  f("tsvad_threshold", c.tsvad_threshold);
  f("median_taps", c.median_taps);
  f("tsvad_max_rounds", c.tsvad_max_rounds);
  f("target_max_s", c.target_max_s);
  f("max_speakers", c.max_speakers);
  f("kmeans_restarts", c.kmeans_restarts);
  f("affinity", c.affinity);
  f("seed", c.seed);
  f("workers", c.workers);
  f("vad_weights", c.vad_weights);
  f("embed16k_weights", c.embed16k_weights);
  f("embed8k_weights", c.embed8k_weights);
  f("v2s_weights", c.v2s_weights);
  f("tsvad_weights", c.tsvad_weights);
}

void parse_value(const std::string& key, const std::string& text, double& out) {
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || !std::isfinite(out)) throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
}

template <class Int>
void parse_value(const std::string& key, const std::string& text, Int& out) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + text + "'");
  try {
    out = static_cast<Int>(std::stoull(text));
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' is out of range: '" + text + "'");
  }
}

void parse_value(const std::string&, const std::string& text, std::string& out) { out = text; }

std::string format_value(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}
template <class Int>
std::string format_value(Int v) {
  return std::to_string(v);
}
std::string format_value(const std::string& v) { return v; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(*this, [&](const char* name, auto& field) {
    if (key == name) {
      parse_value(key, value, field);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown configuration key '" + key + "'");
}

PipelineConfig PipelineConfig::parse(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string PipelineConfig::to_text() const {
  std::string out;
  PipelineConfig copy = *this;
  visit_fields(copy, [&](const char* name, auto& field) { out += std::string(name) + "=" + format_value(field) + "\n"; });
  return out;
}

std::vector<std::string> PipelineConfig::keys() {
  std::vector<std::string> out;
  PipelineConfig c;
  visit_fields(c, [&](const char* name, auto&) { out.emplace_back(name); });
  return out;
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(bandwidth_threshold > 0.0, "bandwidth_threshold must be positive");
  require(bandwidth_horizon_s > 0.0, "bandwidth_horizon_s must be positive");
  require(vad_threshold >= 0.0 && vad_threshold <= 1.0, "vad_threshold must be in [0, 1]");
  require(vad_window_s > 0.0 && vad_shift_s > 0.0 && vad_shift_s <= vad_window_s, "need 0 < vad_shift_s <= vad_window_s");
  require(vad_min_dur_s >= 0.0 && vad_min_gap_s >= 0.0, "VAD minimum durations must be non-negative");
  require(ncts_window_s > 0.0 && ncts_shift_s > 0.0 && ncts_shift_s <= ncts_window_s, "need 0 < ncts_shift_s <= ncts_window_s");
  require(cts_window_s > 0.0 && cts_shift_s > 0.0 && cts_shift_s <= cts_window_s, "need 0 < cts_shift_s <= cts_window_s");
  require(tsvad_threshold >= 0.0 && tsvad_threshold <= 1.0, "tsvad_threshold must be in [0, 1]");
  require(median_taps % 2 == 1, "median_taps must be odd");
  require(tsvad_max_rounds >= 1, "tsvad_max_rounds must be at least 1");
  require(target_max_s > 0.0, "target_max_s must be positive");
  require(max_speakers >= 1, "max_speakers must be at least 1");
  require(kmeans_restarts >= 1, "kmeans_restarts must be at least 1");
  require(affinity == "clip" || affinity == "shift", "affinity must be 'clip' or 'shift'");
  require(merge_mean == "pair" || merge_mean == "members", "merge_mean must be 'pair' or 'members'");
  require(workers >= 1, "workers must be at least 1");
}

// ---------------------------------------------------------------------------
// Models

namespace {

WeightStore load_required(const std::string& path, const char* key, const char* hint) {
  if (path.empty()) throw ConfigError(std::string(key) + " is not set (" + hint + ")");
  try {
    return load_weights(path);
  } catch (const Error& e) {
    throw ConfigError(std::string("cannot load ") + key + " from " + path + ": " + e.what());
  }
}

}  // namespace

ModelSet load_models(const PipelineConfig& cfg, const RunOptions& opts, bool need_vad) {
  ModelSet m;
  if (need_vad) {
    if (opts.stub_vad) {
      m.vad = std::make_shared<EnergySpeechDetector>();
      m.vad_kind = "energy";
    } else {
      m.vad = std::make_shared<VadNet>(VadNetConfig{},
                                       load_required(cfg.vad_weights, "vad_weights", "or use --stub-vad / a VAD directory"));
      m.vad_kind = "network";
    }
  }
  if (opts.stub_embeddings) {
    m.embed16k = m.embed8k = std::make_shared<ToneEmbedder>();
    m.tsvad = std::make_shared<ToneTargetDetector>();
    return m;
  }
  constexpr const char* kHint = "or use --stub-embeddings";
  m.embed16k = std::make_shared<EmbedNet>(EmbedNetConfig{}, load_required(cfg.embed16k_weights, "embed16k_weights", kHint));
  m.embed8k = std::make_shared<EmbedNet>(EmbedNetConfig{}, load_required(cfg.embed8k_weights, "embed8k_weights", kHint));
  m.v2s = std::make_shared<V2sScorer>(V2sConfig{}, load_required(cfg.v2s_weights, "v2s_weights", kHint));
  m.tsvad = std::make_shared<TsvadNet>(TsvadNetConfig{}, load_required(cfg.tsvad_weights, "tsvad_weights", kHint));
  return m;
}

// ---------------------------------------------------------------------------
// Recording-level flows

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<EmbeddedSegment> embed_segments(const AudioBuffer& audio, const std::vector<Segment>& segs,
                                            const SpeakerEmbedder& embedder, std::size_t* skipped) {
  std::vector<EmbeddedSegment> out;
  for (const auto& s : segs) {
    try {
      out.push_back({s, embedder.embed(audio.slice(s.start, s.end))});
    } catch (const InputTooShortError&) {
      if (skipped) ++*skipped;
    }
  }
  return out;
}

std::vector<Segment> intersect(const Segment& s, const std::vector<Segment>& speech) {
  std::vector<Segment> out;
  for (const auto& r : speech) {
    const double b = std::max(s.start, r.start), e = std::min(s.end, r.end);
    if (e > b) out.push_back({b, e});
  }
  return out;
}

double total_duration(const std::vector<Segment>& segs) {
  double t = 0.0;
  for (const auto& s : segs) t += s.duration();
  return t;
}

}  // namespace

Diarization cts_initial_diarization(const AudioBuffer& audio8k, const std::string& recording_id,
                                    const std::vector<Segment>& speech, const SpeakerEmbedder& embedder,
                                    const PipelineConfig& cfg, nlohmann::ordered_json* report) {
  Diarization d;
  d.recording_id = recording_id;
  std::size_t skipped = 0;
  const auto windows = uniform_segments(speech, cfg.cts_window_s, cfg.cts_shift_s);
  const auto embedded = embed_segments(audio8k, windows, embedder, &skipped);
  auto merged = recursive_merge(embedded, cfg.merge_threshold,
                                cfg.merge_mean == "members" ? MergeMean::kMembers : MergeMean::kPair);
  if (report) {
    (*report)["segments"] = windows.size();
    (*report)["segments_skipped"] = skipped;
    (*report)["merged_segments"] = merged.size();
  }
  if (merged.empty()) return d;

  const Clustering clustering = ahc(merged, cfg.ahc_stop_threshold);
  if (report) (*report)["ahc_clusters"] = clustering.num_clusters();

  // Speaker set per merged segment: bit 0 = first speaker, bit 1 = second.
  std::vector<unsigned> who(merged.size(), 1u);
  if (clustering.num_clusters() >= 2) {
    const auto sel = select_two_speakers(merged, clustering);
    for (std::size_t i = 0; i < merged.size(); ++i) {
      if (clustering.labels[i] == sel.cluster_a) who[i] = 1u;
      else if (clustering.labels[i] == sel.cluster_b) who[i] = 2u;
    }
    std::vector<EmbeddedSegment> rest;
    for (std::size_t i : sel.remaining) rest.push_back(merged[i]);
    const auto assign = assign_with_overlap(rest, sel.center_a, sel.center_b, cfg.overlap_threshold);
    for (std::size_t i : sel.remaining) who[i] = 0u;
    for (std::size_t k : assign.speaker_a) who[sel.remaining[k]] |= 1u;
    for (std::size_t k : assign.speaker_b) who[sel.remaining[k]] |= 2u;
  }

  // Neighbouring windows overlap in time; split each shared stretch at its midpoint.
  for (std::size_t i = 0; i + 1 < merged.size(); ++i) {
    auto& a = merged[i].segment;
    auto& b = merged[i + 1].segment;
    if (a.end > b.start) {
      const double mid = std::clamp(0.5 * (a.end + b.start), a.start, b.end);
      a.end = mid;
      b.start = mid;
    }
  }
  for (std::size_t i = 0; i < merged.size(); ++i)
    for (const auto& piece : intersect(merged[i].segment, speech))
      for (unsigned k = 0; k < 2; ++k)
        if (who[i] & (1u << k)) d.turns.push_back({piece, synth_speaker_name(k)});
  return d.normalized();
}

RecordingResult diarize_recording(const AudioBuffer& audio, const std::string& recording_id,
                                  const std::optional<std::vector<Segment>>& speech_in, const ModelSet& models,
                                  const PipelineConfig& cfg) {
  cfg.validate();
  if (audio.samples.empty()) throw EmptyInputError("recording has no samples");
  RecordingResult res;
  auto& rep = res.report;
  nlohmann::ordered_json timing;
  rep["recording_id"] = recording_id;
  rep["duration_s"] = audio.duration();

  auto t0 = Clock::now();
  Bandwidth cls = Bandwidth::kCts;
  if (audio.sample_rate == 16000) {
    const auto bw = classify_bandwidth(audio, cfg.bandwidth_threshold, cfg.bandwidth_horizon_s);
    cls = bw.value;
    rep["bandwidth_peak"] = bw.peak_above_4k;
  } else {
    rep["bandwidth_peak"] = nullptr;  // 8 kHz input is telephone band by construction
  }
  rep["class"] = std::string(to_string(cls));
  timing["partition"] = seconds_since(t0);

  const bool cts = cls == Bandwidth::kCts;
  t0 = Clock::now();
  const AudioBuffer work = cts && audio.sample_rate == 16000 ? resample_to_8k(audio) : audio;
  timing["resample"] = seconds_since(t0);

  t0 = Clock::now();
  std::vector<Segment> speech;
  rep["mode"] = speech_in ? "task1" : "task2";
  if (speech_in) {
    speech = merge_segments(*speech_in);
    rep["vad_source"] = "reference";
  } else {
    if (!models.vad) throw ConfigError("no speech detector loaded and no reference speech supplied");
    speech = binarize(predict_speech(*models.vad, work, {cfg.vad_window_s, cfg.vad_shift_s}),
                      {cfg.vad_threshold, cfg.vad_min_dur_s, cfg.vad_min_gap_s});
    rep["vad_source"] = models.vad_kind;
  }
  rep["vad_model_loaded"] = models.vad != nullptr;
  rep["speech_s"] = total_duration(speech);
  timing["vad"] = seconds_since(t0);

  Diarization d;
  d.recording_id = recording_id;
  if (cts) {
    t0 = Clock::now();
    d = cts_initial_diarization(work, recording_id, speech, *models.embed8k, cfg, &rep);
    timing["cluster"] = seconds_since(t0);
    rep["rounds"] = 0;
    t0 = Clock::now();
    if (!models.tsvad) {
      rep["tsvad_status"] = "disabled";
    } else if (d.speakers().size() < 2) {
      rep["tsvad_status"] = "skipped_single_speaker";
    } else {
      RoundsConfig rc;
      rc.max_rounds = cfg.tsvad_max_rounds;
      rc.target_max_s = cfg.target_max_s;
      rc.post = {cfg.tsvad_threshold, cfg.median_taps};
      try {
        const auto rounds = run_rounds(work, d, speech, *models.tsvad, *models.embed8k, rc);
        d = rounds.diarization;
        rep["rounds"] = rounds.rounds;
        rep["tsvad_status"] = rounds.status;
      } catch (const InsufficientSpeechError& e) {
        rep["tsvad_status"] = std::string("skipped_insufficient_speech: ") + e.what();
      }
    }
    timing["tsvad"] = seconds_since(t0);
  } else {
    t0 = Clock::now();
    std::size_t skipped = 0;
    const auto windows = uniform_segments(speech, cfg.ncts_window_s, cfg.ncts_shift_s);
    const auto embedded = embed_segments(work, windows, *models.embed16k, &skipped);
    rep["segments"] = windows.size();
    rep["segments_skipped"] = skipped;
    timing["embed"] = seconds_since(t0);

    t0 = Clock::now();
    std::vector<std::size_t> labels(embedded.size(), 0);
    if (embedded.size() >= 2) {
      std::vector<Embedding> xs;
      for (const auto& e : embedded) xs.push_back(e.embedding);
      const SimilarityMatrix s =
          models.v2s ? v2s_similarity_matrix(xs, *models.v2s)
                     : cosine_affinity(xs, cfg.affinity == "shift" ? AffinityMapping::kShift : AffinityMapping::kClip);
      SpectralOptions so;
      so.max_speakers = cfg.max_speakers;
      so.restarts = cfg.kmeans_restarts;
      so.seed = cfg.seed;
      labels = spectral_cluster(s, so).clustering.labels;
    }
    rep["similarity"] = models.v2s ? "v2s" : "cosine_" + cfg.affinity;
    timing["cluster"] = seconds_since(t0);

    // Each 10 ms frame takes the label of the covering window whose centre is nearest.
    const auto frames = static_cast<std::size_t>(std::ceil(audio.duration() / kFrameShift));
    std::vector<long> owner(frames, -1);
    std::vector<double> dist(frames, 0.0);
    for (std::size_t i = 0; i < embedded.size(); ++i) {
      const auto& seg = embedded[i].segment;
      const double centre = 0.5 * (seg.start + seg.end) / kFrameShift;
      const long b = std::max(0L, std::lround(seg.start / kFrameShift));
      const long e = std::min(static_cast<long>(frames), std::lround(seg.end / kFrameShift));
      for (long t = b; t < e; ++t) {
        const double dd = std::abs(static_cast<double>(t) + 0.5 - centre);
        auto& o = owner[static_cast<std::size_t>(t)];
        if (o < 0 || dd < dist[static_cast<std::size_t>(t)]) {
          o = static_cast<long>(i);
          dist[static_cast<std::size_t>(t)] = dd;
        }
      }
    }
    for (std::size_t t = 0; t < frames;) {
      if (owner[t] < 0) {
        ++t;
        continue;
      }
      const std::size_t label = labels[static_cast<std::size_t>(owner[t])];
      std::size_t e = t;
      while (e < frames && owner[e] >= 0 && labels[static_cast<std::size_t>(owner[e])] == label) ++e;
      const Segment run{static_cast<double>(t) * kFrameShift, static_cast<double>(e) * kFrameShift};
      for (const auto& piece : intersect(run, speech)) d.turns.push_back({piece, synth_speaker_name(label)});
      t = e;
    }
    d = d.normalized();
  }
  rep["speakers"] = d.speakers().size();
  rep["timing_s"] = timing;
  res.diarization = std::move(d);
  return res;
}

// ---------------------------------------------------------------------------
// Batch

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw InputError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::filesystem::path> collect_inputs(const std::filesystem::path& input) {
  std::vector<std::filesystem::path> out;
  if (std::filesystem::is_directory(input)) {
    for (const auto& entry : std::filesystem::directory_iterator(input))
      if (entry.is_regular_file() && entry.path().extension() == ".wav") out.push_back(entry.path());
    std::sort(out.begin(), out.end());
  } else if (std::filesystem::exists(input)) {
    out.push_back(input);
  } else {
    throw InputError("no such file or directory: " + input.string());
  }
  return out;
}

BatchResult run_pipeline(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir,
                         const PipelineConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  BatchResult result;
  result.reports.resize(inputs.size());
  if (inputs.empty()) return result;
  const ModelSet models = load_models(cfg, opts, !opts.vad_dir.has_value());
  std::filesystem::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      const auto& path = inputs[i];
      const std::string stem = path.stem().string();
      nlohmann::ordered_json rep;
      rep["file"] = path.string();
      const auto t0 = Clock::now();
      try {
        const AudioBuffer audio = read_wav(path);
        std::optional<std::vector<Segment>> speech;
        if (opts.vad_dir) speech = read_vad_file(*opts.vad_dir / (stem + ".lab"));
        auto rec = diarize_recording(audio, stem, speech, models, cfg);
        const auto rttm_path = out_dir / (stem + ".rttm");
        write_file_atomic(rttm_path, emit_rttm(to_rttm(rec.diarization)));
        rep["status"] = "ok";
        rep.update(rec.report);
        rep["rttm"] = rttm_path.string();
      } catch (const std::exception& e) {
        rep["status"] = "error";
        rep["error"] = e.what();
      }
      rep["elapsed_s"] = seconds_since(t0);
      result.reports[i] = std::move(rep);
    }
  };
  const std::size_t n_threads = std::min(cfg.workers, inputs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& r : result.reports) result.failures += r["status"] != "ok";
  return result;
}

}  // namespace diarkit
