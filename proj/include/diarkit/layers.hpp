// include/diarkit/layers.hpp
//
// Forward layers used by the network assemblies. No batch dimension: every
// call processes a single recording.
//
// Conventions
//   affine weights are [out, in] and compute y = x W^T + b.
//   LSTM gates are stacked in the order input, forget, cell, output
//   (w_ih [4H, D], w_hh [4H, H], bias [4H]); zero initial state.
#pragma once

#include <cstddef>
#include <string>

#include "diarkit/tensor.hpp"

namespace diarkit::nn {

struct Stride2 {
  std::size_t h = 1;
  std::size_t w = 1;
};

enum class Padding { kSame, kValid };

// x [C_in, H, W], kernel [C_out, C_in, kh, kw] -> [C_out, H', W'].
// Cross-correlation; kSame pads (k-1)/2 before and the rest after.
Tensor conv2d(const Tensor& x, const Tensor& kernel, Stride2 stride, Padding pad,
              const Tensor* bias = nullptr);

// Per-channel normalization on dimension 0 of x.
Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const Tensor& mean, const Tensor& var, double eps = 1e-5);

struct LstmWeights {
  Tensor w_ih;
  Tensor w_hh;
  Tensor bias;

  std::size_t hidden() const { return w_hh.dims().empty() ? 0 : w_hh.dim(1); }
};

// Reads `{prefix}.w_ih`, `{prefix}.w_hh`, `{prefix}.bias` and checks shapes.
LstmWeights lstm_weights(const WeightStore& store, const std::string& prefix,
                         std::size_t input_dim, std::size_t hidden);

// x [T, D] -> [T, H]; when `reverse` the recurrence runs from the last frame
// and outputs stay aligned to input frames.
Tensor lstm_forward(const Tensor& x, const LstmWeights& w, bool reverse = false);

// x [T, D] -> [T, 2H]: forward outputs then backward outputs per frame.
Tensor bilstm_forward(const Tensor& x, const LstmWeights& fwd, const LstmWeights& bwd);
// Reads `{prefix}.fwd.*` and `{prefix}.bwd.*`.
Tensor bilstm_forward(const Tensor& x, const WeightStore& store, const std::string& prefix,
                      std::size_t hidden);

struct AttentionWeights {
  Tensor wq, bq;  // [A, D], [A]
  Tensor wk, bk;
  Tensor wv, bv;
  Tensor wo, bo;  // [D_out, A], [D_out]
  std::size_t heads = 2;

  std::size_t input_dim() const { return wq.dim(1); }
  std::size_t att_dim() const { return wq.dim(0); }
  std::size_t output_dim() const { return wo.dim(0); }
};

// Reads `{prefix}.{q,k,v,o}.{weight,bias}`.
AttentionWeights attention_weights(const WeightStore& store, const std::string& prefix,
                                   std::size_t input_dim, std::size_t att_dim,
                                   std::size_t output_dim, std::size_t heads);

// Intermediates kept for the backward pass.
struct AttentionCache {
  Tensor q, k, v;   // [T, A]
  Tensor probs;     // [heads, T, T]
  Tensor context;   // [T, A], heads concatenated
};

// x [T, D] -> [T, D_out]. Per head softmax(Q K^T / sqrt(d_head)) V, heads
// concatenated then projected. No positional encoding.
Tensor multi_head_self_attention(const Tensor& x, const AttentionWeights& w,
                                 AttentionCache* cache = nullptr);

// x [T, D] -> [2D]: per-dimension mean then population standard deviation.
Tensor global_stat_pool(const Tensor& x);

// x [C, T, F] -> [T, C]: mean over the frequency axis.
Tensor global_avg_pool_freq(const Tensor& x);

// x [N, in] or [in]; W [out, in]; b [out].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor affine(const Tensor& x, const WeightStore& store, const std::string& prefix,
              std::size_t in, std::size_t out);
Tensor sigmoid(Tensor x);
Tensor relu(Tensor x);
double sigmoid(double x);

// Elementwise a + b.
Tensor add(Tensor a, const Tensor& b);

// Dense helpers on rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k] x [k,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k] x [n,k]^T
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // [k,m]^T x [k,n]
Tensor transpose(const Tensor& a);

}  // namespace diarkit::nn
