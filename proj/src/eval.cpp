// src/eval.cpp
#include "diarkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "diarkit/error.hpp"

namespace diarkit {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_number(const std::string& field, double& out) {
  char* end = nullptr;
  out = std::strtod(field.c_str(), &end);
  return end != field.c_str() && *end == '\0' && std::isfinite(out);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> fields;
  std::string f;
  while (in >> f) fields.push_back(f);
  return fields;
}

}  // namespace

std::vector<RttmTurn> parse_rttm(std::string_view text) {
  std::vector<RttmTurn> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty() || fields[0].rfind(";;", 0) == 0 || fields[0][0] == '#') continue;
    if (fields[0] != "SPEAKER") continue;
    if (fields.size() < 8) throw ParseError(lineno, "SPEAKER line needs at least 8 fields");
    RttmTurn t;
    t.file_id = fields[1];
    if (!parse_number(fields[3], t.onset) || !parse_number(fields[4], t.duration))
      throw ParseError(lineno, "onset and duration must be numbers");
    if (t.onset < 0.0) throw ParseError(lineno, "negative onset");
    if (!(t.duration > 0.0)) throw ParseError(lineno, "duration must be positive");
    t.speaker = fields[7];
    out.push_back(std::move(t));
  }
  return out;
}

std::string emit_rttm(const std::vector<RttmTurn>& turns) {
  std::string out;
  char buf[64];
  for (const auto& t : turns) {
    std::snprintf(buf, sizeof(buf), " 1 %.3f %.3f <NA> <NA> ", t.onset, t.duration);
    out += "SPEAKER " + t.file_id + buf + t.speaker + " <NA> <NA>\n";
  }
  return out;
}

std::vector<RttmTurn> to_rttm(const Diarization& d) {
  std::vector<RttmTurn> out;
  for (const auto& t : d.normalized().turns)
    out.push_back({d.recording_id, t.segment.start, t.segment.duration(), t.speaker});
  return out;
}

std::map<std::string, Diarization> rttm_to_diarizations(const std::vector<RttmTurn>& turns) {
  std::map<std::string, Diarization> out;
  for (const auto& t : turns) {
    auto& d = out[t.file_id];
    d.recording_id = t.file_id;
    d.turns.push_back({{t.onset, t.onset + t.duration}, t.speaker});
  }
  return out;
}

std::map<std::string, Diarization> read_rttm_file(const std::filesystem::path& path) {
  return rttm_to_diarizations(parse_rttm(read_text(path)));
}

std::map<std::string, std::vector<Segment>> parse_uem(std::string_view text) {
  std::map<std::string, std::vector<Segment>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto fields = split_fields(line);
    if (fields.empty() || fields[0][0] == '#' || fields[0].rfind(";;", 0) == 0) continue;
    if (fields.size() != 4) throw ParseError(lineno, "expected '<file-id> <channel> <start> <end>'");
    Segment s;
    if (!parse_number(fields[2], s.start) || !parse_number(fields[3], s.end))
      throw ParseError(lineno, "start and end must be numbers");
    if (s.start < 0.0 || !(s.end > s.start)) throw ParseError(lineno, "invalid region bounds");
    out[fields[0]].push_back(s);
  }
  return out;
}

std::map<std::string, std::vector<Segment>> read_uem_file(const std::filesystem::path& path) {
  return parse_uem(read_text(path));
}

// ---------------------------------------------------------------------------

namespace {

// Hungarian algorithm (potentials form) minimizing cost on an n x n matrix.
std::vector<int> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j]) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  return row_to_col;
}

}  // namespace

std::vector<int> optimal_assignment(const std::vector<std::vector<double>>& weights) {
  const std::size_t rows = weights.size();
  const std::size_t cols = rows ? weights[0].size() : 0;
  const std::size_t n = std::max(rows, cols);
  std::vector<int> result(rows, -1);
  if (n == 0) return result;
  auto w = [&](std::size_t r, std::size_t c) { return r < rows && c < cols ? weights[r][c] : 0.0; };

  std::vector<int> perm(n);
  if (n <= 8) {
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_score = -std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += w(r, static_cast<std::size_t>(perm[r]));
      if (s > best_score) {
        best_score = s;
        best = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    perm = best;
  } else {
    double max_w = 0.0;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) max_w = std::max(max_w, weights[r][c]);
    std::vector<std::vector<double>> cost(n, std::vector<double>(n));
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) cost[r][c] = max_w - w(r, c);
    perm = hungarian_min(cost);
  }
  for (std::size_t r = 0; r < rows; ++r)
    if (perm[r] >= 0 && static_cast<std::size_t>(perm[r]) < cols) result[r] = perm[r];
  return result;
}

DerReport compute_der(const Diarization& ref, const Diarization& hyp, const DerOptions& opts) {
  if (ref.recording_id != hyp.recording_id)
    throw InputError("recording mismatch: reference '" + ref.recording_id + "' vs hypothesis '" +
                     hyp.recording_id + "'");
  if (!(opts.frame_s > 0.0)) throw ParameterError("frame_s must be positive");
  if (opts.collar_s < 0.0) throw ParameterError("collar must be non-negative");

  const auto to_frame = [&](double t) { return std::max(0L, std::lround(t / opts.frame_s)); };
  const auto ref_n = ref.normalized(), hyp_n = hyp.normalized();
  long frames = 0;
  for (const auto& t : ref_n.turns) frames = std::max(frames, to_frame(t.segment.end));
  for (const auto& t : hyp_n.turns) frames = std::max(frames, to_frame(t.segment.end));
  const auto nf = static_cast<std::size_t>(frames);

  const auto ref_spk = ref_n.speakers(), hyp_spk = hyp_n.speakers();
  auto activity = [&](const Diarization& d, const std::vector<std::string>& spk) {
    std::vector<std::vector<std::uint8_t>> act(spk.size(), std::vector<std::uint8_t>(nf, 0));
    for (const auto& t : d.turns) {
      const auto k = static_cast<std::size_t>(std::find(spk.begin(), spk.end(), t.speaker) - spk.begin());
      for (long f = to_frame(t.segment.start); f < to_frame(t.segment.end); ++f) act[k][static_cast<std::size_t>(f)] = 1;
    }
    return act;
  };
  const auto ref_act = activity(ref_n, ref_spk);
  const auto hyp_act = activity(hyp_n, hyp_spk);

  std::vector<std::uint8_t> scored(nf, opts.uem ? 0 : 1);
  if (opts.uem)
    for (const auto& s : *opts.uem)
      for (long f = to_frame(s.start); f < std::min<long>(frames, to_frame(s.end)); ++f) scored[static_cast<std::size_t>(f)] = 1;
  if (opts.collar_s > 0.0) {
    for (const auto& t : ref_n.turns)
      for (double edge : {t.segment.start, t.segment.end})
        for (long f = std::max(0L, to_frame(edge - opts.collar_s)); f < std::min<long>(frames, to_frame(edge + opts.collar_s)); ++f)
          scored[static_cast<std::size_t>(f)] = 0;
  }
  std::vector<int> n_ref(nf, 0), n_hyp(nf, 0);
  for (std::size_t f = 0; f < nf; ++f) {
    for (const auto& a : ref_act) n_ref[f] += a[f];
    for (const auto& a : hyp_act) n_hyp[f] += a[f];
    if (!opts.score_overlap && n_ref[f] > 1) scored[f] = 0;
  }

  std::vector<std::vector<double>> matched(hyp_spk.size(), std::vector<double>(ref_spk.size(), 0.0));
  for (std::size_t h = 0; h < hyp_spk.size(); ++h)
    for (std::size_t r = 0; r < ref_spk.size(); ++r) {
      long c = 0;
      for (std::size_t f = 0; f < nf; ++f) c += scored[f] & hyp_act[h][f] & ref_act[r][f];
      matched[h][r] = static_cast<double>(c);
    }
  const auto assign = optimal_assignment(matched);

  long miss = 0, fa = 0, overlap_count = 0, total = 0;
  for (std::size_t f = 0; f < nf; ++f) {
    if (!scored[f]) continue;
    total += n_ref[f];
    miss += std::max(0, n_ref[f] - n_hyp[f]);
    fa += std::max(0, n_hyp[f] - n_ref[f]);
    overlap_count += std::min(n_ref[f], n_hyp[f]);
  }
  long correct = 0;
  DerReport rep;
  for (std::size_t h = 0; h < assign.size(); ++h) {
    if (assign[h] < 0) continue;
    correct += static_cast<long>(matched[h][static_cast<std::size_t>(assign[h])]);
    rep.mapping[hyp_spk[h]] = ref_spk[static_cast<std::size_t>(assign[h])];
  }
  rep.total_ref_s = static_cast<double>(total) * opts.frame_s;
  rep.miss_s = static_cast<double>(miss) * opts.frame_s;
  rep.false_alarm_s = static_cast<double>(fa) * opts.frame_s;
  rep.confusion_s = static_cast<double>(overlap_count - correct) * opts.frame_s;
  if (total > 0) {
    rep.miss = static_cast<double>(miss) / static_cast<double>(total);
    rep.false_alarm = static_cast<double>(fa) / static_cast<double>(total);
    rep.confusion = static_cast<double>(overlap_count - correct) / static_cast<double>(total);
    rep.der = rep.miss + rep.false_alarm + rep.confusion;
  } else if (fa > 0) {
    rep.der = rep.false_alarm = std::numeric_limits<double>::infinity();
  }
  return rep;
}

DerReport aggregate_der(const std::vector<DerReport>& reports) {
  DerReport out;
  for (const auto& r : reports) {
    out.total_ref_s += r.total_ref_s;
    out.miss_s += r.miss_s;
    out.false_alarm_s += r.false_alarm_s;
    out.confusion_s += r.confusion_s;
  }
  if (out.total_ref_s > 0.0) {
    out.miss = out.miss_s / out.total_ref_s;
    out.false_alarm = out.false_alarm_s / out.total_ref_s;
    out.confusion = out.confusion_s / out.total_ref_s;
    out.der = out.miss + out.false_alarm + out.confusion;
  } else if (out.false_alarm_s > 0.0) {
    out.der = out.false_alarm = std::numeric_limits<double>::infinity();
  }
  return out;
}

double vad_frame_accuracy(const std::vector<bool>& ref, const std::vector<bool>& hyp) {
  if (ref.size() != hyp.size())
    throw InputError("mask lengths differ: " + std::to_string(ref.size()) + " vs " + std::to_string(hyp.size()));
  if (ref.empty()) throw InputError("empty masks");
  std::size_t same = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) same += ref[i] == hyp[i];
  return static_cast<double>(same) / static_cast<double>(ref.size());
}

}  // namespace diarkit
