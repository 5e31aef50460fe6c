// src/layers.cpp
#include "diarkit/layers.hpp"

#include <algorithm>
#include <cmath>

#include "diarkit/error.hpp"

namespace diarkit::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// First output index whose input tap lands at or after 0, and one past the
// last whose tap lands before `extent`.
std::pair<std::ptrdiff_t, std::ptrdiff_t> valid_range(std::ptrdiff_t out_extent, std::ptrdiff_t extent,
                                                      std::ptrdiff_t stride, std::ptrdiff_t offset) {
  // input = o * stride + offset
  std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  std::ptrdiff_t hi = extent - 1 - offset < 0 ? 0 : (extent - 1 - offset) / stride + 1;
  return {std::min(lo, out_extent), std::min(hi, out_extent)};
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, Stride2 stride, Padding pad, const Tensor* bias) {
  require(x.rank() == 3 && kernel.rank() == 4, "conv2d expects x [C,H,W] and kernel [Co,Ci,kh,kw]");
  require(kernel.dim(1) == x.dim(0), "conv2d channel mismatch: input " + shape_string(x.dims()) +
                                         ", kernel " + shape_string(kernel.dims()));
  require(stride.h > 0 && stride.w > 0, "conv2d stride must be positive");
  const auto cin = static_cast<std::ptrdiff_t>(x.dim(0));
  const auto h = static_cast<std::ptrdiff_t>(x.dim(1));
  const auto w = static_cast<std::ptrdiff_t>(x.dim(2));
  const auto cout = static_cast<std::ptrdiff_t>(kernel.dim(0));
  const auto kh = static_cast<std::ptrdiff_t>(kernel.dim(2));
  const auto kw = static_cast<std::ptrdiff_t>(kernel.dim(3));
  const auto sh = static_cast<std::ptrdiff_t>(stride.h);
  const auto sw = static_cast<std::ptrdiff_t>(stride.w);

  std::ptrdiff_t pad_h = 0, pad_w = 0, top = 0, left = 0;
  if (pad == Padding::kSame) {
    pad_h = kh - 1;
    pad_w = kw - 1;
    top = pad_h / 2;
    left = pad_w / 2;
  }
  require(h + pad_h >= kh && w + pad_w >= kw, "conv2d kernel larger than padded input");
  const std::ptrdiff_t oh = (h + pad_h - kh) / sh + 1;
  const std::ptrdiff_t ow = (w + pad_w - kw) / sw + 1;
  if (bias) require(bias->size() == static_cast<std::size_t>(cout), "conv2d bias length mismatch");

  Tensor out({static_cast<std::size_t>(cout), static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  const double* xin = x.data();
  const double* k = kernel.data();
  double* y = out.data();
  for (std::ptrdiff_t co = 0; co < cout; ++co) {
    double* plane = y + co * oh * ow;
    if (bias) std::fill(plane, plane + oh * ow, (*bias)[static_cast<std::size_t>(co)]);
    for (std::ptrdiff_t ci = 0; ci < cin; ++ci) {
      const double* src = xin + ci * h * w;
      for (std::ptrdiff_t ky = 0; ky < kh; ++ky) {
        const auto [oy0, oy1] = valid_range(oh, h, sh, ky - top);
        for (std::ptrdiff_t kx = 0; kx < kw; ++kx) {
          const double wt = k[((co * cin + ci) * kh + ky) * kw + kx];
          if (wt == 0.0) continue;
          const auto [ox0, ox1] = valid_range(ow, w, sw, kx - left);
          for (std::ptrdiff_t oy = oy0; oy < oy1; ++oy) {
            const double* row = src + (oy * sh + ky - top) * w + (kx - left);
            double* dst = plane + oy * ow;
            if (sw == 1) {
              for (std::ptrdiff_t ox = ox0; ox < ox1; ++ox) dst[ox] += wt * row[ox];
            } else {
              for (std::ptrdiff_t ox = ox0; ox < ox1; ++ox) dst[ox] += wt * row[ox * sw];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                        const Tensor& var, double eps) {
  require(x.rank() >= 1, "batch_norm_infer expects at least rank 1");
  const std::size_t c = x.dim(0);
  require(gamma.size() == c && beta.size() == c && mean.size() == c && var.size() == c,
          "batch_norm_infer parameter length mismatch for " + std::to_string(c) + " channels");
  const std::size_t inner = x.size() / std::max<std::size_t>(c, 1);
  Tensor out = x;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double scale = gamma[ch] / std::sqrt(var[ch] + eps);
    const double shift = beta[ch] - mean[ch] * scale;
    double* p = out.data() + ch * inner;
    for (std::size_t i = 0; i < inner; ++i) p[i] = p[i] * scale + shift;
  }
  return out;
}

LstmWeights lstm_weights(const WeightStore& store, const std::string& prefix, std::size_t input_dim,
                         std::size_t hidden) {
  return {store.get(prefix + ".w_ih", {4 * hidden, input_dim}),
          store.get(prefix + ".w_hh", {4 * hidden, hidden}), store.get(prefix + ".bias", {4 * hidden})};
}

Tensor lstm_forward(const Tensor& x, const LstmWeights& w, bool reverse) {
  require(x.rank() == 2, "lstm_forward expects x [T, D]");
  const std::size_t t_len = x.dim(0);
  const std::size_t d = x.dim(1);
  const std::size_t hdim = w.hidden();
  require(w.w_ih.rank() == 2 && w.w_ih.dim(0) == 4 * hdim && w.w_ih.dim(1) == d,
          "lstm w_ih shape " + shape_string(w.w_ih.dims()) + " incompatible with input " +
              shape_string(x.dims()));
  require(w.w_hh.rank() == 2 && w.w_hh.dim(0) == 4 * hdim, "lstm w_hh shape mismatch");
  require(w.bias.size() == 4 * hdim, "lstm bias length mismatch");

  // Input projections for every frame at once.
  Tensor gx = matmul_nt(x, w.w_ih);
  Tensor out({t_len, hdim});
  std::vector<double> h(hdim, 0.0), c(hdim, 0.0), gates(4 * hdim);
  for (std::size_t step = 0; step < t_len; ++step) {
    const std::size_t t = reverse ? t_len - 1 - step : step;
    for (std::size_t g = 0; g < 4 * hdim; ++g) {
      double acc = gx.at(t, g) + w.bias[g];
      const double* wr = w.w_hh.data() + g * hdim;
      for (std::size_t j = 0; j < hdim; ++j) acc += wr[j] * h[j];
      gates[g] = acc;
    }
    for (std::size_t j = 0; j < hdim; ++j) {
      const double i_gate = sigmoid(gates[j]);
      const double f_gate = sigmoid(gates[hdim + j]);
      const double g_cell = std::tanh(gates[2 * hdim + j]);
      const double o_gate = sigmoid(gates[3 * hdim + j]);
      c[j] = f_gate * c[j] + i_gate * g_cell;
      h[j] = o_gate * std::tanh(c[j]);
      out.at(t, j) = h[j];
    }
  }
  return out;
}

Tensor bilstm_forward(const Tensor& x, const LstmWeights& fwd, const LstmWeights& bwd) {
  const Tensor f = lstm_forward(x, fwd, false);
  const Tensor b = lstm_forward(x, bwd, true);
  const std::size_t t_len = x.dim(0), hf = fwd.hidden(), hb = bwd.hidden();
  Tensor out({t_len, hf + hb});
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < hf; ++j) out.at(t, j) = f.at(t, j);
    for (std::size_t j = 0; j < hb; ++j) out.at(t, hf + j) = b.at(t, j);
  }
  return out;
}

Tensor bilstm_forward(const Tensor& x, const WeightStore& store, const std::string& prefix,
                      std::size_t hidden) {
  require(x.rank() == 2, "bilstm_forward expects x [T, D]");
  return bilstm_forward(x, lstm_weights(store, prefix + ".fwd", x.dim(1), hidden),
                        lstm_weights(store, prefix + ".bwd", x.dim(1), hidden));
}

AttentionWeights attention_weights(const WeightStore& store, const std::string& prefix,
                                   std::size_t input_dim, std::size_t att_dim, std::size_t output_dim,
                                   std::size_t heads) {
  AttentionWeights w;
  w.wq = store.get(prefix + ".q.weight", {att_dim, input_dim});
  w.bq = store.get(prefix + ".q.bias", {att_dim});
  w.wk = store.get(prefix + ".k.weight", {att_dim, input_dim});
  w.bk = store.get(prefix + ".k.bias", {att_dim});
  w.wv = store.get(prefix + ".v.weight", {att_dim, input_dim});
  w.bv = store.get(prefix + ".v.bias", {att_dim});
  w.wo = store.get(prefix + ".o.weight", {output_dim, att_dim});
  w.bo = store.get(prefix + ".o.bias", {output_dim});
  w.heads = heads;
  return w;
}

Tensor multi_head_self_attention(const Tensor& x, const AttentionWeights& w, AttentionCache* cache) {
  require(x.rank() == 2, "attention expects x [T, D]");
  require(w.heads > 0 && w.att_dim() % w.heads == 0, "attention units must divide into heads");
  require(x.dim(1) == w.input_dim(), "attention input width " + std::to_string(x.dim(1)) +
                                         " != " + std::to_string(w.input_dim()));
  const std::size_t t_len = x.dim(0), a = w.att_dim(), dh = a / w.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = affine(x, w.wq, w.bq), k = affine(x, w.wk, w.bk), v = affine(x, w.wv, w.bv);
  Tensor probs({w.heads, t_len, t_len});
  Tensor context({t_len, a});
  for (std::size_t hd = 0; hd < w.heads; ++hd) {
    const std::size_t off = hd * dh;
    for (std::size_t i = 0; i < t_len; ++i) {
      double mx = -INFINITY;
      for (std::size_t j = 0; j < t_len; ++j) {
        double s = 0.0;
        for (std::size_t e = 0; e < dh; ++e) s += q.at(i, off + e) * k.at(j, off + e);
        s *= scale;
        probs.at(hd, i, j) = s;
        mx = std::max(mx, s);
      }
      double z = 0.0;
      for (std::size_t j = 0; j < t_len; ++j) {
        const double e = std::exp(probs.at(hd, i, j) - mx);
        probs.at(hd, i, j) = e;
        z += e;
      }
      for (std::size_t j = 0; j < t_len; ++j) probs.at(hd, i, j) /= z;
      for (std::size_t j = 0; j < t_len; ++j) {
        const double p = probs.at(hd, i, j);
        for (std::size_t e = 0; e < dh; ++e) context.at(i, off + e) += p * v.at(j, off + e);
      }
    }
  }
  Tensor y = affine(context, w.wo, w.bo);
  if (cache) {
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return y;
}

Tensor global_stat_pool(const Tensor& x) {
  require(x.rank() == 2, "global_stat_pool expects x [T, D]");
  const std::size_t t_len = x.dim(0), d = x.dim(1);
  if (t_len == 0) throw EmptyInputError("global_stat_pool over zero frames");
  Tensor out({2 * d});
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) mean += x.at(t, j);
    mean /= static_cast<double>(t_len);
    double var = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double dv = x.at(t, j) - mean;
      var += dv * dv;
    }
    out[j] = mean;
    out[d + j] = std::sqrt(var / static_cast<double>(t_len));
  }
  return out;
}

Tensor global_avg_pool_freq(const Tensor& x) {
  require(x.rank() == 3, "global_avg_pool_freq expects x [C, T, F]");
  const std::size_t c = x.dim(0), t_len = x.dim(1), f = x.dim(2);
  require(f >= 1, "global_avg_pool_freq needs at least one frequency bin");
  Tensor out({t_len, c});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t t = 0; t < t_len; ++t) {
      double s = 0.0;
      for (std::size_t b = 0; b < f; ++b) s += x.at(ch, t, b);
      out.at(t, ch) = s / static_cast<double>(f);
    }
  return out;
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(w.rank() == 2, "affine weight must be [out, in]");
  const std::size_t out_dim = w.dim(0), in_dim = w.dim(1);
  require(b.size() == out_dim, "affine bias length mismatch");
  if (x.rank() == 1) {
    require(x.size() == in_dim, "affine input width " + std::to_string(x.size()) + " != " +
                                    std::to_string(in_dim));
    Tensor y = affine(x.reshaped({1, in_dim}), w, b);
    return y.reshaped({out_dim});
  }
  require(x.rank() == 2 && x.dim(1) == in_dim,
          "affine input " + shape_string(x.dims()) + " incompatible with weight " + shape_string(w.dims()));
  Tensor y = matmul_nt(x, w);
  for (std::size_t n = 0; n < x.dim(0); ++n)
    for (std::size_t o = 0; o < out_dim; ++o) y.at(n, o) += b[o];
  return y;
}

Tensor affine(const Tensor& x, const WeightStore& store, const std::string& prefix, std::size_t in,
              std::size_t out) {
  return affine(x, store.get(prefix + ".weight", {out, in}), store.get(prefix + ".bias", {out}));
}

Tensor sigmoid(Tensor x) {
  for (double& v : x.values()) v = sigmoid(v);
  return x;
}

Tensor relu(Tensor x) {
  for (double& v : x.values()) v = std::max(v, 0.0);
  return x;
}

Tensor add(Tensor a, const Tensor& b) {
  require(a.dims() == b.dims(), "add shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), "matmul shape mismatch");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.at(i, p);
      if (av == 0.0) continue;
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(1), "matmul_nt shape mismatch");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c.at(i, j) = s;
    }
  }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(0) == b.dim(0), "matmul_tn shape mismatch");
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t p = 0; p < k; ++p) {
    const double* ap = a.data() + p * m;
    const double* bp = b.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = ap[i];
      if (av == 0.0) continue;
      double* ci = c.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose expects rank 2");
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

}  // namespace diarkit::nn
