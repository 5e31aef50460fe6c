// tools/diarkit_cli.cpp
//
// Command-line front end: partition, vad, diarize, tsvad, score, synth, config.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "diarkit/bandwidth.hpp"
#include "diarkit/error.hpp"
#include "diarkit/eval.hpp"
#include "diarkit/pipeline.hpp"
#include "diarkit/synth.hpp"
#include "diarkit/tsvad.hpp"
#include "diarkit/vad.hpp"

namespace fs = std::filesystem;
using namespace diarkit;

namespace {

constexpr int kExitFileFailure = 2;

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override one configuration key (key=value); repeatable");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void emit_lines(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out_path, text);
  }
}

int cmd_partition(const std::vector<std::string>& inputs, const PipelineConfig& cfg) {
  int status = 0;
  for (const auto& in : inputs) {
    for (const auto& path : collect_inputs(in)) {
      try {
        const auto audio = read_wav(path);
        char peak[32] = "-";  // 8 kHz input is telephone band by construction
        Bandwidth cls = Bandwidth::kCts;
        if (audio.sample_rate == 16000) {
          const auto bw = classify_bandwidth(audio, cfg.bandwidth_threshold, cfg.bandwidth_horizon_s);
          cls = bw.value;
          std::snprintf(peak, sizeof(peak), "%.6f", bw.peak_above_4k);
        }
        std::cout << path.stem().string() << '\t' << to_string(cls) << '\t' << peak << '\n';
      } catch (const std::exception& e) {
        std::cerr << "diarkit partition: " << path.string() << ": " << e.what() << '\n';
        status = kExitFileFailure;
      }
    }
  }
  return status;
}

int cmd_vad(const std::string& input, const PipelineConfig& cfg, bool stub_vad, const std::string& out_path) {
  RunOptions opts;
  opts.stub_vad = stub_vad;
  opts.stub_embeddings = true;  // embedders are not needed here
  const auto models = load_models(cfg, opts, true);
  std::string text;
  int status = 0;
  for (const auto& path : collect_inputs(input)) {
    try {
      const auto audio = read_wav(path);
      const auto mask = predict_speech(*models.vad, audio, {cfg.vad_window_s, cfg.vad_shift_s});
      text += format_vad_segments(path.stem().string(),
                                  binarize(mask, {cfg.vad_threshold, cfg.vad_min_dur_s, cfg.vad_min_gap_s}));
    } catch (const std::exception& e) {
      std::cerr << "diarkit vad: " << path.string() << ": " << e.what() << '\n';
      status = kExitFileFailure;
    }
  }
  emit_lines(text, out_path);
  return status;
}

int cmd_diarize(const std::string& input, const std::string& out_dir, const PipelineConfig& cfg, const RunOptions& opts,
                const std::string& report_path) {
  const auto inputs = collect_inputs(input);
  const auto batch = run_pipeline(inputs, out_dir, cfg, opts);
  std::string text;
  for (const auto& r : batch.reports) text += r.dump() + "\n";
  emit_lines(text, report_path);
  return batch.failures ? kExitFileFailure : 0;
}

int cmd_tsvad(const std::string& wav, const std::string& initial_rttm, const std::string& vad_path,
              const std::string& out_path, const PipelineConfig& cfg, const RunOptions& opts) {
  const auto models = load_models(cfg, opts, vad_path.empty());
  AudioBuffer audio = read_wav(wav);
  if (audio.sample_rate == 16000) audio = resample_to_8k(audio);
  const std::string id = fs::path(wav).stem().string();
  const auto initial_all = read_rttm_file(initial_rttm);
  const auto it = initial_all.find(id);
  if (it == initial_all.end()) throw InputError("no turns for '" + id + "' in " + initial_rttm);

  std::vector<Segment> speech;
  if (!vad_path.empty()) {
    speech = merge_segments(read_vad_file(vad_path));
  } else {
    speech = binarize(predict_speech(*models.vad, audio, {cfg.vad_window_s, cfg.vad_shift_s}),
                      {cfg.vad_threshold, cfg.vad_min_dur_s, cfg.vad_min_gap_s});
  }
  RoundsConfig rc;
  rc.max_rounds = cfg.tsvad_max_rounds;
  rc.target_max_s = cfg.target_max_s;
  rc.post = {cfg.tsvad_threshold, cfg.median_taps};
  const auto rounds = run_rounds(audio, it->second, speech, *models.tsvad, *models.embed8k, rc);
  emit_lines(emit_rttm(to_rttm(rounds.diarization)), out_path);

  nlohmann::ordered_json rep;
  rep["recording_id"] = id;
  rep["rounds"] = rounds.rounds;
  rep["converged"] = rounds.converged;
  rep["tsvad_status"] = rounds.status;
  std::cerr << rep.dump() << '\n';
  return 0;
}

std::map<std::string, Diarization> read_rttm_input(const std::string& path) {
  std::map<std::string, Diarization> out;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.path().extension() == ".rttm") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  for (const auto& f : files)
    for (auto& [id, d] : read_rttm_file(f)) {
      auto& dst = out[id];
      dst.recording_id = id;
      dst.turns.insert(dst.turns.end(), d.turns.begin(), d.turns.end());
    }
  return out;
}

std::string percent_line(const std::string& name, const DerReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-24s DER %6.2f%%  miss %6.2f%%  fa %6.2f%%  conf %6.2f%%  ref %.3f s\n", name.c_str(),
                100.0 * r.der, 100.0 * r.miss, 100.0 * r.false_alarm, 100.0 * r.confusion, r.total_ref_s);
  return buf;
}

int cmd_score(const std::string& ref_path, const std::string& hyp_path, const std::string& uem_path, double collar,
              bool ignore_overlap) {
  const auto refs = read_rttm_input(ref_path);
  const auto hyps = read_rttm_input(hyp_path);
  std::map<std::string, std::vector<Segment>> uem;
  if (!uem_path.empty()) uem = read_uem_file(uem_path);
  std::vector<DerReport> reports;
  for (const auto& [id, ref] : refs) {
    DerOptions opts;
    opts.collar_s = collar;
    opts.score_overlap = !ignore_overlap;
    if (!uem_path.empty()) {
      const auto u = uem.find(id);
      opts.uem = u == uem.end() ? std::vector<Segment>{} : u->second;
    }
    Diarization hyp;
    hyp.recording_id = id;
    if (const auto h = hyps.find(id); h != hyps.end()) hyp = h->second;
    reports.push_back(compute_der(ref, hyp, opts));
    std::cout << percent_line(id, reports.back());
  }
  for (const auto& [id, hyp] : hyps)
    if (!refs.count(id)) std::cerr << "diarkit score: hypothesis '" << id << "' has no reference; ignored\n";
  std::cout << percent_line("*** OVERALL ***", aggregate_der(reports));
  return 0;
}

int cmd_synth(const fs::path& out_dir, std::size_t count, SynthSpec spec) {
  for (std::size_t i = 0; i < count; ++i) {
    SynthSpec s = spec;
    s.seed = spec.seed + i;
    char stem[32];
    std::snprintf(stem, sizeof(stem), "synth%03zu", i);
    write_synth_case(out_dir, stem, gen_audio_conversation(s, stem));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diarkit: speaker diarization toolkit"};
  app.require_subcommand(1);

  // partition
  auto* partition = app.add_subcommand("partition", "classify recordings as telephone (CTS) or wide-band (NCTS)");
  std::vector<std::string> partition_inputs;
  partition->add_option("inputs", partition_inputs, "WAV files or directories")->required();
  ConfigArgs partition_cfg;
  partition_cfg.attach(partition);

  // vad
  auto* vad = app.add_subcommand("vad", "write speech segments as '<file-id> <start> <end>' lines");
  std::string vad_input, vad_out;
  bool vad_stub = false;
  vad->add_option("input", vad_input, "WAV file or directory")->required();
  vad->add_option("--out", vad_out, "output file (default: stdout)");
  vad->add_flag("--stub-vad", vad_stub, "use the energy detector instead of the VAD network");
  ConfigArgs vad_cfg;
  vad_cfg.attach(vad);

  // diarize
  auto* diarize = app.add_subcommand("diarize", "run the full pipeline and write one RTTM per recording");
  std::string dia_input, dia_out, dia_report, dia_vad_dir;
  RunOptions dia_opts;
  std::size_t dia_workers = 0;
  diarize->add_option("input", dia_input, "WAV file or directory")->required();
  diarize->add_option("--out-dir", dia_out, "directory for <stem>.rttm outputs")->required();
  diarize->add_option("--report", dia_report, "JSON-lines run report (default: stdout)");
  diarize->add_option("--vad-dir", dia_vad_dir, "task 1: directory of <stem>.lab reference speech files");
  diarize->add_option("--workers", dia_workers, "parallel recordings (overrides the config)");
  diarize->add_flag("--stub-embeddings", dia_opts.stub_embeddings, "tone-coded stand-ins for all speaker models");
  diarize->add_flag("--stub-vad", dia_opts.stub_vad, "use the energy detector instead of the VAD network");
  ConfigArgs dia_cfg;
  dia_cfg.attach(diarize);

  // tsvad
  auto* tsvad = app.add_subcommand("tsvad", "re-run TSVAD rounds from an existing RTTM (telephone recordings)");
  std::string ts_wav, ts_initial, ts_vad, ts_out;
  RunOptions ts_opts;
  tsvad->add_option("input", ts_wav, "WAV file")->required()->check(CLI::ExistingFile);
  tsvad->add_option("--initial", ts_initial, "RTTM with the initial speaker regions")->required()->check(CLI::ExistingFile);
  tsvad->add_option("--vad", ts_vad, "reference speech file ('<start> <end>' lines)");
  tsvad->add_option("--out", ts_out, "output RTTM (default: stdout)");
  tsvad->add_flag("--stub-embeddings", ts_opts.stub_embeddings, "tone-coded stand-ins for all speaker models");
  tsvad->add_flag("--stub-vad", ts_opts.stub_vad, "use the energy detector instead of the VAD network");
  ConfigArgs ts_cfg;
  ts_cfg.attach(tsvad);

  // score
  auto* score = app.add_subcommand("score", "diarization error rate per file and overall");
  std::string sc_ref, sc_hyp, sc_uem;
  double sc_collar = 0.0;
  bool sc_no_overlap = false;
  score->add_option("--ref", sc_ref, "reference RTTM file or directory")->required();
  score->add_option("--hyp", sc_hyp, "hypothesis RTTM file or directory")->required();
  score->add_option("--uem", sc_uem, "UEM file restricting scored regions");
  score->add_option("--collar", sc_collar, "seconds excluded around reference boundaries");
  score->add_flag("--ignore-overlap", sc_no_overlap, "do not score regions with overlapping reference speech");

  // synth
  auto* synth = app.add_subcommand("synth", "write tone-coded conversations with reference RTTM and speech labels");
  std::string sy_out;
  std::size_t sy_count = 1;
  SynthSpec sy_spec;
  synth->add_option("--out-dir", sy_out, "output directory")->required();
  synth->add_option("--count", sy_count, "number of conversations");
  synth->add_option("--seed", sy_spec.seed, "seed of the first conversation (incremented per file)");
  synth->add_option("--speakers", sy_spec.n_speakers, "speakers per conversation (1-8)");
  synth->add_option("--duration", sy_spec.duration_s, "seconds per conversation");
  synth->add_option("--overlap", sy_spec.overlap_fraction, "target overlapped-speech fraction");
  synth->add_option("--turn-min", sy_spec.turn_min_s, "shortest turn (s)");
  synth->add_option("--turn-max", sy_spec.turn_max_s, "longest turn (s)");
  synth->add_option("--noise", sy_spec.noise_sigma, "white-noise standard deviation");
  synth->add_option("--sample-rate", sy_spec.sample_rate, "8000 or 16000");

  // config
  auto* config = app.add_subcommand("config", "print the effective configuration");
  ConfigArgs show_cfg;
  show_cfg.attach(config);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*partition) return cmd_partition(partition_inputs, partition_cfg.resolve());
    if (*vad) return cmd_vad(vad_input, vad_cfg.resolve(), vad_stub, vad_out);
    if (*diarize) {
      PipelineConfig cfg = dia_cfg.resolve();
      if (dia_workers) cfg.workers = dia_workers;
      if (!dia_vad_dir.empty()) dia_opts.vad_dir = dia_vad_dir;
      return cmd_diarize(dia_input, dia_out, cfg, dia_opts, dia_report);
    }
    if (*tsvad) return cmd_tsvad(ts_wav, ts_initial, ts_vad, ts_out, ts_cfg.resolve(), ts_opts);
    if (*score) return cmd_score(sc_ref, sc_hyp, sc_uem, sc_collar, sc_no_overlap);
    if (*synth) return cmd_synth(sy_out, sy_count, sy_spec);
    if (*config) {
      std::cout << show_cfg.resolve().to_text();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "diarkit: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
