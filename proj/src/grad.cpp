// src/grad.cpp
#include "diarkit/grad.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diarkit/error.hpp"
#include "diarkit/rng.hpp"

namespace diarkit::nn {

AffineGrad affine_backward(const Tensor& x, const Tensor& w, const Tensor& dy) {
  if (x.rank() != 2 || dy.rank() != 2 || x.dim(0) != dy.dim(0) || dy.dim(1) != w.dim(0))
    throw ShapeError("affine_backward shape mismatch");
  AffineGrad g;
  g.dx = matmul(dy, w);
  g.dw = matmul_tn(dy, x);
  g.db = Tensor({w.dim(0)});
  for (std::size_t n = 0; n < dy.dim(0); ++n)
    for (std::size_t o = 0; o < dy.dim(1); ++o) g.db[o] += dy.at(n, o);
  return g;
}

Tensor relu_backward(const Tensor& pre, Tensor dy) {
  if (pre.size() != dy.size()) throw ShapeError("relu_backward shape mismatch");
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (pre[i] <= 0.0) dy[i] = 0.0;
  return dy;
}

AttentionGrad attention_backward(const Tensor& x, const AttentionWeights& w, const AttentionCache& cache,
                                 const Tensor& dy) {
  const std::size_t t_len = x.dim(0), a = w.att_dim(), dh = a / w.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionGrad g;
  auto out = affine_backward(cache.context, w.wo, dy);
  g.dw.wo = std::move(out.dw);
  g.dw.bo = std::move(out.db);
  const Tensor& dctx = out.dx;  // [T, A]

  Tensor dq({t_len, a}), dk({t_len, a}), dv({t_len, a});
  std::vector<double> dp(t_len), ds(t_len);
  for (std::size_t hd = 0; hd < w.heads; ++hd) {
    const std::size_t off = hd * dh;
    for (std::size_t i = 0; i < t_len; ++i) {
      // dP[i, j] = dctx[i] . v[j];  dv[j] += P[i, j] dctx[i]
      double dot = 0.0;
      for (std::size_t j = 0; j < t_len; ++j) {
        const double p = cache.probs.at(hd, i, j);
        double s = 0.0;
        for (std::size_t e = 0; e < dh; ++e) {
          s += dctx.at(i, off + e) * cache.v.at(j, off + e);
          dv.at(j, off + e) += p * dctx.at(i, off + e);
        }
        dp[j] = s;
        dot += p * s;
      }
      for (std::size_t j = 0; j < t_len; ++j) ds[j] = cache.probs.at(hd, i, j) * (dp[j] - dot) * scale;
      for (std::size_t j = 0; j < t_len; ++j) {
        for (std::size_t e = 0; e < dh; ++e) {
          dq.at(i, off + e) += ds[j] * cache.k.at(j, off + e);
          dk.at(j, off + e) += ds[j] * cache.q.at(i, off + e);
        }
      }
    }
  }

  auto gq = affine_backward(x, w.wq, dq);
  auto gk = affine_backward(x, w.wk, dk);
  auto gv = affine_backward(x, w.wv, dv);
  g.dx = add(add(std::move(gq.dx), gk.dx), gv.dx);
  g.dw.wq = std::move(gq.dw);
  g.dw.bq = std::move(gq.db);
  g.dw.wk = std::move(gk.dw);
  g.dw.bk = std::move(gk.db);
  g.dw.wv = std::move(gv.dw);
  g.dw.bv = std::move(gv.db);
  g.dw.heads = w.heads;
  return g;
}

double bce_with_logits(std::span<const double> logits, std::span<const double> targets,
                       std::vector<double>* dlogits) {
  if (logits.size() != targets.size() || logits.empty())
    throw ShapeError("bce_with_logits needs equal, non-empty inputs");
  const double n = static_cast<double>(logits.size());
  double loss = 0.0;
  if (dlogits) dlogits->assign(logits.size(), 0.0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], y = targets[i];
    // log(1 + e^z) - y z, evaluated stably
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    if (dlogits) (*dlogits)[i] = (sigmoid(z) - y) / n;
  }
  return loss / n;
}

double relative_gradient_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckResult finite_diff_check(const std::function<double(std::span<const double>)>& f,
                                  std::span<const double> params, std::span<const double> analytic,
                                  double h, std::size_t probes, std::uint64_t seed) {
  if (params.size() != analytic.size()) throw ShapeError("gradient and parameter lengths differ");
  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (probes < coords.size()) {
    Rng rng(seed);
    for (std::size_t i = 0; i < probes; ++i) {
      const std::size_t j = i + rng.index(coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(probes);
  }

  std::vector<double> p(params.begin(), params.end());
  GradCheckResult result;
  for (std::size_t c : coords) {
    const double orig = p[c];
    p[c] = orig + h;
    const double up = f(p);
    p[c] = orig - h;
    const double down = f(p);
    p[c] = orig;
    const double numeric = (up - down) / (2.0 * h);
    if (!std::isfinite(numeric) || !std::isfinite(analytic[c]))
      throw NumericError("non-finite value during gradient check");
    result.max_rel_error = std::max(result.max_rel_error, relative_gradient_error(analytic[c], numeric));
    ++result.probes;
  }
  return result;
}

}  // namespace diarkit::nn
