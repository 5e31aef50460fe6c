// tests/oracles.hpp
//
// Deliberately naive reference implementations used as test oracles. They
// share no code with the library: plain index loops, long-double
// accumulation, explicit formulas.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "diarkit/rng.hpp"
#include "diarkit/tensor.hpp"
#include "diarkit/types.hpp"

namespace oracle {

using diarkit::Tensor;

inline constexpr long double kPi = 3.141592653589793238462643383279502884L;

inline Tensor random_tensor(std::vector<std::size_t> dims, diarkit::Rng& rng, double scale = 1.0) {
  Tensor t(std::move(dims));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.uniform(-1.0, 1.0);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) return std::numeric_limits<double>::infinity();
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// |X_k| of a real frame zero-padded to nfft, k = 0..nfft/2, by the O(N^2) sum.
inline std::vector<double> dft_magnitude(const std::vector<double>& frame, std::size_t nfft) {
  std::vector<double> out(nfft / 2 + 1);
  for (std::size_t k = 0; k <= nfft / 2; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t n = 0; n < frame.size() && n < nfft; ++n) {
      const long double ang = -2.0L * kPi * static_cast<long double>(k * n % nfft) / static_cast<long double>(nfft);
      re += frame[n] * std::cos(ang);
      im += frame[n] * std::sin(ang);
    }
    out[k] = static_cast<double>(std::sqrt(re * re + im * im));
  }
  return out;
}

// x [C, H, W], k [Co, C, kh, kw]. `same` pads (k - 1) / 2 before.
inline Tensor conv2d(const Tensor& x, const Tensor& k, std::size_t sh, std::size_t sw, bool same) {
  const long c = static_cast<long>(x.dim(0)), h = static_cast<long>(x.dim(1)), w = static_cast<long>(x.dim(2));
  const long co = static_cast<long>(k.dim(0)), kh = static_cast<long>(k.dim(2)), kw = static_cast<long>(k.dim(3));
  const long ph = same ? kh - 1 : 0, pw = same ? kw - 1 : 0;
  const long top = ph / 2, left = pw / 2;
  const long oh = (h + ph - kh) / static_cast<long>(sh) + 1;
  const long ow = (w + pw - kw) / static_cast<long>(sw) + 1;
  Tensor y({static_cast<std::size_t>(co), static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  for (long o = 0; o < co; ++o)
    for (long i = 0; i < oh; ++i)
      for (long j = 0; j < ow; ++j) {
        long double acc = 0.0L;
        for (long ci = 0; ci < c; ++ci)
          for (long a = 0; a < kh; ++a)
            for (long b = 0; b < kw; ++b) {
              const long r = i * static_cast<long>(sh) + a - top;
              const long q = j * static_cast<long>(sw) + b - left;
              if (r < 0 || r >= h || q < 0 || q >= w) continue;
              acc += x.at(ci, r, q) * k[((o * c + ci) * kh + a) * kw + b];
            }
        y.at(o, i, j) = static_cast<double>(acc);
      }
  return y;
}

inline Tensor batch_norm(const Tensor& x, const Tensor& g, const Tensor& b, const Tensor& m, const Tensor& v,
                         double eps) {
  Tensor y = x;
  const std::size_t per = x.size() / x.dim(0);
  for (std::size_t c = 0; c < x.dim(0); ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const double xi = x[c * per + i];
      y[c * per + i] = g[c] * (xi - m[c]) / std::sqrt(v[c] + eps) + b[c];
    }
  return y;
}

inline long double sig(long double z) { return 1.0L / (1.0L + std::exp(-z)); }

// Single-direction LSTM, gates i, f, g, o stacked in w_ih [4H, D], w_hh [4H, H].
inline Tensor lstm(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh, const Tensor& bias, bool reverse) {
  const std::size_t t_len = x.dim(0), d = x.dim(1), hd = w_hh.dim(1);
  Tensor y({t_len, hd});
  std::vector<long double> h(hd, 0.0L), c(hd, 0.0L);
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? t_len - 1 - step : step;
    std::vector<long double> z(4 * hd);
    for (std::size_t r = 0; r < 4 * hd; ++r) {
      long double acc = bias[r];
      for (std::size_t j = 0; j < d; ++j) acc += w_ih.at(r, j) * x.at(t, j);
      for (std::size_t j = 0; j < hd; ++j) acc += w_hh.at(r, j) * h[j];
      z[r] = acc;
    }
    for (std::size_t u = 0; u < hd; ++u) {
      const long double ig = sig(z[u]);
      const long double fg = sig(z[hd + u]);
      const long double gg = std::tanh(z[2 * hd + u]);
      const long double og = sig(z[3 * hd + u]);
      c[u] = fg * c[u] + ig * gg;
      h[u] = og * std::tanh(c[u]);
      y.at(t, u) = static_cast<double>(h[u]);
    }
  }
  return y;
}

// Multi-head self-attention; also returns the attention probabilities
// [heads][T][T] through `probs` when non-null.
inline Tensor attention(const Tensor& x, const Tensor& wq, const Tensor& bq, const Tensor& wk, const Tensor& bk,
                        const Tensor& wv, const Tensor& bv, const Tensor& wo, const Tensor& bo, std::size_t heads,
                        std::vector<std::vector<std::vector<double>>>* probs = nullptr) {
  const std::size_t t_len = x.dim(0), d = x.dim(1), a = wq.dim(0), dout = wo.dim(0);
  const std::size_t dh = a / heads;
  auto project = [&](const Tensor& w, const Tensor& b) {
    std::vector<std::vector<long double>> p(t_len, std::vector<long double>(a));
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t r = 0; r < a; ++r) {
        long double acc = b[r];
        for (std::size_t j = 0; j < d; ++j) acc += w.at(r, j) * x.at(t, j);
        p[t][r] = acc;
      }
    return p;
  };
  const auto q = project(wq, bq), k = project(wk, bk), v = project(wv, bv);
  std::vector<std::vector<long double>> ctx(t_len, std::vector<long double>(a, 0.0L));
  if (probs) probs->assign(heads, std::vector<std::vector<double>>(t_len, std::vector<double>(t_len)));
  for (std::size_t hh = 0; hh < heads; ++hh)
    for (std::size_t i = 0; i < t_len; ++i) {
      std::vector<long double> s(t_len);
      long double mx = -std::numeric_limits<long double>::infinity();
      for (std::size_t j = 0; j < t_len; ++j) {
        long double dot = 0.0L;
        for (std::size_t r = 0; r < dh; ++r) dot += q[i][hh * dh + r] * k[j][hh * dh + r];
        s[j] = dot / std::sqrt(static_cast<long double>(dh));
        mx = std::max(mx, s[j]);
      }
      long double z = 0.0L;
      for (auto& e : s) z += (e = std::exp(e - mx));
      for (std::size_t j = 0; j < t_len; ++j) {
        const long double p = s[j] / z;
        if (probs) (*probs)[hh][i][j] = static_cast<double>(p);
        for (std::size_t r = 0; r < dh; ++r) ctx[i][hh * dh + r] += p * v[j][hh * dh + r];
      }
    }
  Tensor y({t_len, dout});
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t o = 0; o < dout; ++o) {
      long double acc = bo[o];
      for (std::size_t r = 0; r < a; ++r) acc += wo.at(o, r) * ctx[t][r];
      y.at(t, o) = static_cast<double>(acc);
    }
  return y;
}

// Mean and population std from raw moments in long double.
inline Tensor stat_pool(const Tensor& x) {
  const std::size_t t_len = x.dim(0), d = x.dim(1);
  Tensor y({2 * d});
  for (std::size_t j = 0; j < d; ++j) {
    long double s = 0.0L, s2 = 0.0L;
    for (std::size_t t = 0; t < t_len; ++t) {
      s += x.at(t, j);
      s2 += static_cast<long double>(x.at(t, j)) * x.at(t, j);
    }
    const long double mean = s / t_len;
    y[j] = static_cast<double>(mean);
    y[d + j] = static_cast<double>(std::sqrt(std::max(0.0L, s2 / t_len - mean * mean)));
  }
  return y;
}

inline Tensor avg_pool_freq(const Tensor& x) {
  const std::size_t c = x.dim(0), t_len = x.dim(1), f = x.dim(2);
  Tensor y({t_len, c});
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t ch = 0; ch < c; ++ch) {
      long double s = 0.0L;
      for (std::size_t b = 0; b < f; ++b) s += x.at(ch, t, b);
      y.at(t, ch) = static_cast<double>(s / f);
    }
  return y;
}

// ---------------------------------------------------------------------------
// Diarization error rate by brute force: per-speaker frame masks on a 1 ms
// grid and every partial one-to-one hypothesis -> reference mapping.

struct DerCounts {
  long miss = 0;
  long false_alarm = 0;
  long confusion = 0;
  long total_ref = 0;
  double der() const {
    if (total_ref == 0) return (false_alarm > 0) ? std::numeric_limits<double>::infinity() : 0.0;
    return static_cast<double>(miss + false_alarm + confusion) / static_cast<double>(total_ref);
  }
};

inline std::map<std::string, std::vector<char>> speaker_frames(const diarkit::Diarization& d, long frames) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& t : d.turns) {
    auto& m = out[t.speaker];
    m.resize(static_cast<std::size_t>(frames), 0);
    const long b = std::lround(t.segment.start * 1000.0), e = std::lround(t.segment.end * 1000.0);
    for (long i = std::max(0L, b); i < std::min(e, frames); ++i) m[static_cast<std::size_t>(i)] = 1;
  }
  return out;
}

inline DerCounts brute_force_der(const diarkit::Diarization& ref, const diarkit::Diarization& hyp) {
  long frames = 0;
  for (const auto* d : {&ref, &hyp})
    for (const auto& t : d->turns) frames = std::max(frames, std::lround(t.segment.end * 1000.0));
  const auto rf = speaker_frames(ref, frames), hf = speaker_frames(hyp, frames);
  std::vector<const std::vector<char>*> rv, hv;
  for (const auto& [_, m] : rf) rv.push_back(&m);
  for (const auto& [_, m] : hf) hv.push_back(&m);

  // Every assignment of each hypothesis speaker to a distinct reference
  // speaker or to nobody (-1), enumerated recursively.
  std::vector<int> assign(hv.size(), -1), best_assign;
  std::vector<char> used(rv.size(), 0);
  long best_correct = -1;
  auto count_correct = [&] {
    long correct = 0;
    for (std::size_t h = 0; h < hv.size(); ++h) {
      if (assign[h] < 0) continue;
      const auto& a = *hv[h];
      const auto& b = *rv[static_cast<std::size_t>(assign[h])];
      for (long i = 0; i < frames; ++i) correct += (a[static_cast<std::size_t>(i)] && b[static_cast<std::size_t>(i)]);
    }
    return correct;
  };
  auto recurse = [&](auto&& self, std::size_t h) -> void {
    if (h == hv.size()) {
      const long c = count_correct();
      if (c > best_correct) best_correct = c;
      return;
    }
    assign[h] = -1;
    self(self, h + 1);
    for (std::size_t r = 0; r < rv.size(); ++r) {
      if (used[r]) continue;
      used[r] = 1;
      assign[h] = static_cast<int>(r);
      self(self, h + 1);
      used[r] = 0;
      assign[h] = -1;
    }
  };
  recurse(recurse, 0);

  DerCounts out;
  long overlap = 0;
  for (long i = 0; i < frames; ++i) {
    long nr = 0, nh = 0;
    for (const auto* m : rv) nr += (*m)[static_cast<std::size_t>(i)];
    for (const auto* m : hv) nh += (*m)[static_cast<std::size_t>(i)];
    out.total_ref += nr;
    out.miss += std::max(0L, nr - nh);
    out.false_alarm += std::max(0L, nh - nr);
    overlap += std::min(nr, nh);
  }
  out.confusion = overlap - best_correct;
  return out;
}

// Fraction of items whose predicted label maps to the true label under the
// best one-to-one relabelling (exhaustive over permutations; k <= 8).
inline double best_permutation_accuracy(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred) {
  std::size_t kt = 0, kp = 0;
  for (auto v : truth) kt = std::max(kt, v + 1);
  for (auto v : pred) kp = std::max(kp, v + 1);
  const std::size_t k = std::max(kt, kp);
  std::vector<std::vector<std::size_t>> conf(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++conf[pred[i]][truth[i]];
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t best = 0;
  do {
    std::size_t hit = 0;
    for (std::size_t p = 0; p < k; ++p) hit += conf[p][perm[p]];
    best = std::max(best, hit);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return truth.empty() ? 1.0 : static_cast<double>(best) / static_cast<double>(truth.size());
}

// Random diarization with turns on a whole-millisecond grid so the 1 ms
// discretization is exact. Turns of one speaker may overlap each other.
inline diarkit::Diarization random_diarization(diarkit::Rng& rng, const std::string& id, std::size_t max_speakers,
                                               double max_s, const std::string& prefix) {
  diarkit::Diarization d;
  d.recording_id = id;
  const std::size_t n_spk = 1 + rng.index(max_speakers);
  const long limit = std::lround(max_s * 1000.0);
  for (std::size_t s = 0; s < n_spk; ++s) {
    const std::size_t turns = rng.index(5);
    for (std::size_t i = 0; i < turns; ++i) {
      const long a = static_cast<long>(rng.index(static_cast<std::uint64_t>(limit)));
      const long len = 1 + static_cast<long>(rng.index(static_cast<std::uint64_t>(std::min(limit - a, 15000L))));
      d.turns.push_back({{static_cast<double>(a) / 1000.0, static_cast<double>(a + len) / 1000.0},
                         prefix + std::to_string(s)});
    }
  }
  return d;
}

}  // namespace oracle
