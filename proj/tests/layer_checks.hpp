// tests/layer_checks.hpp
//
// One randomized library-vs-oracle comparison per layer type. Each call draws
// a random shape and random parameters and returns the largest absolute
// deviation from the naive oracle.
#pragma once

#include <algorithm>
#include <cmath>

#include "diarkit/layers.hpp"
#include "diarkit/rng.hpp"
#include "oracles.hpp"

namespace layer_checks {

using diarkit::Rng;
using diarkit::Tensor;
namespace nn = diarkit::nn;

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.index(hi - lo + 1); }

inline double conv_trial(Rng& rng) {
  const std::size_t c = pick(rng, 1, 4), co = pick(rng, 1, 4);
  const std::size_t kh = pick(rng, 1, 3), kw = pick(rng, 1, 3);
  const std::size_t h = pick(rng, kh, 9), w = pick(rng, kw, 9);
  const std::size_t sh = pick(rng, 1, 2), sw = pick(rng, 1, 2);
  const bool same = rng.uniform() < 0.5;
  const Tensor x = oracle::random_tensor({c, h, w}, rng);
  const Tensor k = oracle::random_tensor({co, c, kh, kw}, rng);
  const Tensor y = nn::conv2d(x, k, {sh, sw}, same ? nn::Padding::kSame : nn::Padding::kValid);
  return oracle::max_abs_diff(y, oracle::conv2d(x, k, sh, sw, same));
}

inline double batch_norm_trial(Rng& rng) {
  const std::size_t c = pick(rng, 1, 6), t = pick(rng, 1, 7), f = pick(rng, 1, 7);
  const Tensor x = oracle::random_tensor({c, t, f}, rng, 3.0);
  const Tensor g = oracle::random_tensor({c}, rng), b = oracle::random_tensor({c}, rng);
  const Tensor m = oracle::random_tensor({c}, rng);
  Tensor v = oracle::random_tensor({c}, rng);
  for (std::size_t i = 0; i < c; ++i) v[i] = 0.1 + std::fabs(v[i]);
  return oracle::max_abs_diff(nn::batch_norm_infer(x, g, b, m, v), oracle::batch_norm(x, g, b, m, v, 1e-5));
}

inline nn::LstmWeights random_lstm(Rng& rng, std::size_t d, std::size_t h, double scale = 0.5) {
  return {oracle::random_tensor({4 * h, d}, rng, scale), oracle::random_tensor({4 * h, h}, rng, scale),
          oracle::random_tensor({4 * h}, rng, scale)};
}

inline double bilstm_trial(Rng& rng) {
  const std::size_t t = pick(rng, 1, 12), d = pick(rng, 1, 6), h = pick(rng, 1, 5);
  const Tensor x = oracle::random_tensor({t, d}, rng);
  const auto fwd = random_lstm(rng, d, h), bwd = random_lstm(rng, d, h);
  const Tensor y = nn::bilstm_forward(x, fwd, bwd);
  const Tensor yf = oracle::lstm(x, fwd.w_ih, fwd.w_hh, fwd.bias, false);
  const Tensor yb = oracle::lstm(x, bwd.w_ih, bwd.w_hh, bwd.bias, true);
  Tensor ref({t, 2 * h});
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t u = 0; u < h; ++u) {
      ref.at(i, u) = yf.at(i, u);
      ref.at(i, h + u) = yb.at(i, u);
    }
  return oracle::max_abs_diff(y, ref);
}

inline nn::AttentionWeights random_attention(Rng& rng, std::size_t d, std::size_t a, std::size_t dout,
                                             std::size_t heads, double scale = 0.5) {
  nn::AttentionWeights w;
  w.wq = oracle::random_tensor({a, d}, rng, scale);
  w.bq = oracle::random_tensor({a}, rng, scale);
  w.wk = oracle::random_tensor({a, d}, rng, scale);
  w.bk = oracle::random_tensor({a}, rng, scale);
  w.wv = oracle::random_tensor({a, d}, rng, scale);
  w.bv = oracle::random_tensor({a}, rng, scale);
  w.wo = oracle::random_tensor({dout, a}, rng, scale);
  w.bo = oracle::random_tensor({dout}, rng, scale);
  w.heads = heads;
  return w;
}

struct AttentionTrial {
  double max_error = 0.0;
  double max_row_sum_error = 0.0;
};

inline AttentionTrial attention_trial(Rng& rng) {
  const std::size_t heads = pick(rng, 1, 3), dh = pick(rng, 1, 4);
  const std::size_t t = pick(rng, 1, 10), d = pick(rng, 1, 8), dout = pick(rng, 1, 6);
  const auto w = random_attention(rng, d, heads * dh, dout, heads);
  const Tensor x = oracle::random_tensor({t, d}, rng);
  nn::AttentionCache cache;
  const Tensor y = nn::multi_head_self_attention(x, w, &cache);
  std::vector<std::vector<std::vector<double>>> probs;
  const Tensor ref = oracle::attention(x, w.wq, w.bq, w.wk, w.bk, w.wv, w.bv, w.wo, w.bo, heads, &probs);
  AttentionTrial out;
  out.max_error = oracle::max_abs_diff(y, ref);
  for (std::size_t hh = 0; hh < heads; ++hh)
    for (std::size_t i = 0; i < t; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < t; ++j) {
        sum += cache.probs.at(hh, i, j);
        out.max_error = std::max(out.max_error, std::fabs(cache.probs.at(hh, i, j) - probs[hh][i][j]));
      }
      out.max_row_sum_error = std::max(out.max_row_sum_error, std::fabs(sum - 1.0));
    }
  return out;
}

inline double stat_pool_trial(Rng& rng) {
  const Tensor x = oracle::random_tensor({pick(rng, 1, 30), pick(rng, 1, 10)}, rng, 2.0);
  return oracle::max_abs_diff(nn::global_stat_pool(x), oracle::stat_pool(x));
}

inline double avg_pool_trial(Rng& rng) {
  const Tensor x = oracle::random_tensor({pick(rng, 1, 6), pick(rng, 1, 10), pick(rng, 1, 9)}, rng, 2.0);
  return oracle::max_abs_diff(nn::global_avg_pool_freq(x), oracle::avg_pool_freq(x));
}

// BiLSTM with every parameter zero; returns max |output|.
inline double zero_bilstm_trial(Rng& rng) {
  const std::size_t t = pick(rng, 1, 12), d = pick(rng, 1, 6), h = pick(rng, 1, 5);
  const nn::LstmWeights z{Tensor({4 * h, d}), Tensor({4 * h, h}), Tensor({4 * h})};
  const Tensor y = nn::bilstm_forward(oracle::random_tensor({t, d}, rng, 5.0), z, z);
  double m = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) m = std::max(m, std::fabs(y[i]));
  return m;
}

}  // namespace layer_checks
