// include/diarkit/grad.hpp
//
// Analytic gradients for the trainable scorer subgraph (affine, ReLU,
// self-attention, sigmoid + BCE) and a central-difference checker.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "diarkit/layers.hpp"

namespace diarkit::nn {

struct AffineGrad {
  Tensor dx;  // [N, in]
  Tensor dw;  // [out, in]
  Tensor db;  // [out]
};

// x [N, in], dy [N, out].
AffineGrad affine_backward(const Tensor& x, const Tensor& w, const Tensor& dy);

// Gradient through relu given its pre-activation.
Tensor relu_backward(const Tensor& pre, Tensor dy);

struct AttentionGrad {
  Tensor dx;
  AttentionWeights dw;
};

AttentionGrad attention_backward(const Tensor& x, const AttentionWeights& w,
                                 const AttentionCache& cache, const Tensor& dy);

// Mean binary cross-entropy of sigmoid(logits) against targets in {0, 1}.
// Fills dlogits (same length) when non-null.
double bce_with_logits(std::span<const double> logits, std::span<const double> targets,
                       std::vector<double>* dlogits = nullptr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

// |a - n| / max(1e-8, |a| + |n|)
double relative_gradient_error(double analytic, double numeric);

// Compares `analytic` against central differences of `f` at `params` on
// `probes` coordinates drawn with `seed` (all coordinates when probes >= size).
// Throws NumericError on non-finite values.
GradCheckResult finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> params,
                                  std::span<const double> analytic, double h = 1e-4,
                                  std::size_t probes = 20, std::uint64_t seed = 0);

}  // namespace diarkit::nn
