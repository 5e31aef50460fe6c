// include/diarkit/eval.hpp
//
// RTTM and UEM exchange formats, diarization error rate with an optimal
// one-to-one speaker mapping, and frame-level VAD accuracy.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "diarkit/types.hpp"

namespace diarkit {

struct RttmTurn {
  std::string file_id;
  double onset = 0.0;
  double duration = 0.0;
  std::string speaker;

  bool operator==(const RttmTurn&) const = default;
};

// SPEAKER lines only; other record types, blank lines and ';;' / '#'
// comments are skipped. Throws ParseError (1-based line) on malformed lines.
std::vector<RttmTurn> parse_rttm(std::string_view text);
// "SPEAKER <file> 1 <onset %.3f> <dur %.3f> <NA> <NA> <speaker> <NA> <NA>" per turn.
std::string emit_rttm(const std::vector<RttmTurn>& turns);

std::vector<RttmTurn> to_rttm(const Diarization& d);
// Groups turns by file id.
std::map<std::string, Diarization> rttm_to_diarizations(const std::vector<RttmTurn>& turns);
std::map<std::string, Diarization> read_rttm_file(const std::filesystem::path& path);

// "<file-id> <channel> <start> <end>" lines, grouped by file id.
std::map<std::string, std::vector<Segment>> parse_uem(std::string_view text);
std::map<std::string, std::vector<Segment>> read_uem_file(const std::filesystem::path& path);

struct DerOptions {
  double collar_s = 0.0;      // excluded on both sides of every reference boundary
  bool score_overlap = true;  // false: frames with two or more reference speakers are not scored
  double frame_s = 0.001;
  std::optional<std::vector<Segment>> uem;  // scored regions; everything when unset
};

struct DerReport {
  double der = 0.0;
  double miss = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  double total_ref_s = 0.0;
  double miss_s = 0.0;
  double false_alarm_s = 0.0;
  double confusion_s = 0.0;
  std::map<std::string, std::string> mapping;  // hypothesis -> reference speaker
};

// Frame-discretized DER. Per scored frame with N_ref reference and N_hyp
// hypothesis speakers and N_correct mapped matches:
//   miss += max(0, N_ref - N_hyp), false alarm += max(0, N_hyp - N_ref),
//   confusion += min(N_ref, N_hyp) - N_correct,
// all divided by the total reference speaker time. The mapping maximizes
// matched time (exhaustive search up to 8 speakers, Hungarian beyond).
// Throws InputError when the recording ids differ.
DerReport compute_der(const Diarization& ref, const Diarization& hyp, const DerOptions& opts = {});

// Pools seconds across recordings and recomputes the fractions.
DerReport aggregate_der(const std::vector<DerReport>& reports);

// Maximum-weight one-to-one assignment on a rows x cols matrix; result[r] is
// the chosen column or -1.
std::vector<int> optimal_assignment(const std::vector<std::vector<double>>& weights);

// Fraction of frames with the same speech decision. Throws InputError on
// length mismatch or empty masks.
double vad_frame_accuracy(const std::vector<bool>& ref, const std::vector<bool>& hyp);

}  // namespace diarkit
