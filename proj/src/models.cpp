// src/models.cpp
#include "diarkit/models.hpp"

#include <algorithm>
#include <cmath>

#include "diarkit/error.hpp"
#include "diarkit/grad.hpp"

namespace diarkit {

using nn::Padding;
using nn::Stride2;

namespace {

std::string stage_block(const std::string& prefix, std::size_t s, std::size_t b) {
  return prefix + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
}

bool needs_projection(std::size_t in_ch, std::size_t out_ch, Stride2 stride) {
  return in_ch != out_ch || stride.h != 1 || stride.w != 1;
}

void init_bn(WeightStore& store, const std::string& name, std::size_t ch) {
  store.set(name + ".gamma", Tensor({ch}, 1.0));
  store.set(name + ".beta", Tensor({ch}, 0.0));
  store.set(name + ".mean", Tensor({ch}, 0.0));
  store.set(name + ".var", Tensor({ch}, 1.0));
}

void init_conv(WeightStore& store, const std::string& name, std::size_t out, std::size_t in, std::size_t k,
               Rng& rng) {
  store.set(name + ".kernel", he_uniform({out, in, k, k}, in * k * k, rng));
}

void init_affine(WeightStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  store.set(name + ".weight", he_uniform({out, in}, in, rng));
  store.set(name + ".bias", Tensor({out}, 0.0));
}

void init_lstm(WeightStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (const char* dir : {".fwd", ".bwd"}) {
    auto uniform = [&](std::vector<std::size_t> dims) {
      Tensor t(std::move(dims));
      for (double& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
      return t;
    };
    store.set(name + dir + ".w_ih", uniform({4 * hidden, in}));
    store.set(name + dir + ".w_hh", uniform({4 * hidden, hidden}));
    store.set(name + dir + ".bias", Tensor({4 * hidden}, 0.0));
  }
}

Tensor conv_bn(const Tensor& x, const WeightStore& store, const std::string& conv, const std::string& bn,
               Stride2 stride, Padding pad) {
  const Tensor y = nn::conv2d(x, store.get(conv + ".kernel"), stride, pad);
  return nn::batch_norm_infer(y, store.get(bn + ".gamma"), store.get(bn + ".beta"), store.get(bn + ".mean"),
                              store.get(bn + ".var"));
}

// [C, T, F] -> [T, C * F], channel-major within a frame.
Tensor flatten_frames(const Tensor& maps) {
  const std::size_t c = maps.dim(0), t_len = maps.dim(1), f = maps.dim(2);
  Tensor out({t_len, c * f});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t b = 0; b < f; ++b) out.at(t, ch * f + b) = maps.at(ch, t, b);
  return out;
}

void check_bins(const FeatureMatrix& f, std::size_t bins, const char* who) {
  if (f.bins != bins)
    throw ShapeError(std::string(who) + " expects " + std::to_string(bins) + " bins, got " +
                     std::to_string(f.bins));
}

void check_resnet(const WeightStore& store, const std::string& prefix, const ResNetConfig& cfg) {
  store.get(prefix + ".stem.conv.kernel", {cfg.widths[0], cfg.in_channels, 3, 3});
  std::size_t in_ch = cfg.widths[0];
  for (std::size_t s = 0; s < cfg.widths.size(); ++s)
    for (std::size_t b = 0; b < cfg.blocks[s]; ++b) {
      const auto base = stage_block(prefix, s, b);
      store.get(base + ".conv1.kernel", {cfg.widths[s], in_ch, 3, 3});
      store.get(base + ".conv2.kernel", {cfg.widths[s], cfg.widths[s], 3, 3});
      in_ch = cfg.widths[s];
    }
}

}  // namespace

Tensor he_uniform(std::vector<std::size_t> dims, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  Tensor t(std::move(dims));
  for (double& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

Tensor features_to_image(const FeatureMatrix& f) { return Tensor({1, f.frames, f.bins}, f.data); }

// ---------------------------------------------------------------------------
// ResNet

std::size_t ResNetConfig::output_bins(std::size_t bins) const {
  for (const auto& s : strides) bins = (bins - 1) / s.w + 1;
  return bins;
}

std::size_t ResNetConfig::output_frames(std::size_t frames) const {
  for (const auto& s : strides) frames = (frames - 1) / s.h + 1;
  return frames;
}

ResNetConfig resnet18_vad() {
  return {{16, 32, 64, 128}, {2, 2, 2, 2}, {{1, 1}, {1, 2}, {1, 2}, {1, 2}}, 1};
}

ResNetConfig resnet34_embed() {
  return {{32, 64, 128, 256}, {3, 4, 6, 3}, {{1, 1}, {2, 2}, {2, 2}, {2, 2}}, 1};
}

void init_resnet(WeightStore& store, const std::string& prefix, const ResNetConfig& cfg, Rng& rng) {
  if (cfg.widths.size() != cfg.blocks.size() || cfg.widths.size() != cfg.strides.size() || cfg.widths.empty())
    throw ParameterError("resnet config lists must be non-empty and equally long");
  init_conv(store, prefix + ".stem.conv", cfg.widths[0], cfg.in_channels, 3, rng);
  init_bn(store, prefix + ".stem.bn", cfg.widths[0]);
  std::size_t in_ch = cfg.widths[0];
  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    for (std::size_t b = 0; b < cfg.blocks[s]; ++b) {
      const auto base = stage_block(prefix, s, b);
      const Stride2 stride = b == 0 ? cfg.strides[s] : Stride2{1, 1};
      init_conv(store, base + ".conv1", cfg.widths[s], in_ch, 3, rng);
      init_bn(store, base + ".bn1", cfg.widths[s]);
      init_conv(store, base + ".conv2", cfg.widths[s], cfg.widths[s], 3, rng);
      init_bn(store, base + ".bn2", cfg.widths[s]);
      if (needs_projection(in_ch, cfg.widths[s], stride)) {
        init_conv(store, base + ".shortcut.conv", cfg.widths[s], in_ch, 1, rng);
        init_bn(store, base + ".shortcut.bn", cfg.widths[s]);
      }
      in_ch = cfg.widths[s];
    }
  }
}

Tensor resnet_forward(const Tensor& x, const WeightStore& store, const std::string& prefix,
                      const ResNetConfig& cfg) {
  Tensor h = nn::relu(conv_bn(x, store, prefix + ".stem.conv", prefix + ".stem.bn", {1, 1}, Padding::kSame));
  std::size_t in_ch = cfg.widths[0];
  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    for (std::size_t b = 0; b < cfg.blocks[s]; ++b) {
      const auto base = stage_block(prefix, s, b);
      const Stride2 stride = b == 0 ? cfg.strides[s] : Stride2{1, 1};
      Tensor y = nn::relu(conv_bn(h, store, base + ".conv1", base + ".bn1", stride, Padding::kSame));
      y = conv_bn(y, store, base + ".conv2", base + ".bn2", {1, 1}, Padding::kSame);
      Tensor skip = needs_projection(in_ch, cfg.widths[s], stride)
                        ? conv_bn(h, store, base + ".shortcut.conv", base + ".shortcut.bn", stride,
                                  Padding::kValid)
                        : std::move(h);
      h = nn::relu(nn::add(std::move(y), skip));
      in_ch = cfg.widths[s];
    }
  }
  return h;
}

std::size_t copy_resnet_parameters(const WeightStore& src, const std::string& from, WeightStore& dst,
                                   const std::string& to) {
  const WeightStore sub = src.subtree(from + ".resnet");
  if (sub.empty()) throw InputError("no parameters under '" + from + ".resnet'");
  dst.merge(sub, to + ".resnet");
  return sub.size();
}

// ---------------------------------------------------------------------------
// VAD

VadNet::VadNet(VadNetConfig cfg, WeightStore weights) : cfg_(std::move(cfg)), weights_(std::move(weights)) {
  check_resnet(weights_, "vad.resnet", cfg_.resnet);
  std::size_t in = cfg_.resnet.widths.back();
  for (std::size_t l = 0; l < cfg_.lstm_layers; ++l) {
    nn::lstm_weights(weights_, "vad.lstm" + std::to_string(l + 1) + ".fwd", in, cfg_.lstm_hidden);
    in = 2 * cfg_.lstm_hidden;
  }
  weights_.get("vad.fc1.weight", {cfg_.fc_hidden, in});
  weights_.get("vad.fc2.weight", {1, cfg_.fc_hidden});
}

VadNet VadNet::random(VadNetConfig cfg, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore w;
  init_resnet(w, "vad.resnet", cfg.resnet, rng);
  std::size_t in = cfg.resnet.widths.back();
  for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
    init_lstm(w, "vad.lstm" + std::to_string(l + 1), in, cfg.lstm_hidden, rng);
    in = 2 * cfg.lstm_hidden;
  }
  init_affine(w, "vad.fc1", in, cfg.fc_hidden, rng);
  init_affine(w, "vad.fc2", cfg.fc_hidden, 1, rng);
  return VadNet(std::move(cfg), std::move(w));
}

std::vector<double> VadNet::forward(const FeatureMatrix& f) const {
  check_bins(f, cfg_.n_mels, "VadNet");
  if (f.frames == 0) throw EmptyInputError("VadNet input has no frames");
  const Tensor maps = resnet_forward(features_to_image(f), weights_, "vad.resnet", cfg_.resnet);
  Tensor h = nn::global_avg_pool_freq(maps);  // [T, C]
  for (std::size_t l = 0; l < cfg_.lstm_layers; ++l)
    h = nn::bilstm_forward(h, weights_, "vad.lstm" + std::to_string(l + 1), cfg_.lstm_hidden);
  h = nn::relu(nn::affine(h, weights_, "vad.fc1", h.dim(1), cfg_.fc_hidden));
  h = nn::sigmoid(nn::affine(h, weights_, "vad.fc2", cfg_.fc_hidden, 1));
  return h.vector();
}

// ---------------------------------------------------------------------------
// Speaker embedding

EmbedNet::EmbedNet(EmbedNetConfig cfg, WeightStore weights) : cfg_(std::move(cfg)), weights_(std::move(weights)) {
  check_resnet(weights_, "embed.resnet", cfg_.resnet);
  const std::size_t pooled = 2 * cfg_.resnet.widths.back() * cfg_.resnet.output_bins(cfg_.n_mels);
  weights_.get("embed.fc.weight", {cfg_.embedding_dim, pooled});
}

EmbedNet EmbedNet::random(EmbedNetConfig cfg, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore w;
  init_resnet(w, "embed.resnet", cfg.resnet, rng);
  const std::size_t pooled = 2 * cfg.resnet.widths.back() * cfg.resnet.output_bins(cfg.n_mels);
  init_affine(w, "embed.fc", pooled, cfg.embedding_dim, rng);
  return EmbedNet(std::move(cfg), std::move(w));
}

Embedding EmbedNet::forward(const FeatureMatrix& f) const {
  check_bins(f, cfg_.n_mels, "EmbedNet");
  if (f.frames < cfg_.min_frames)
    throw InputTooShortError("embedding input has " + std::to_string(f.frames) + " frames, need " +
                             std::to_string(cfg_.min_frames));
  const Tensor maps = resnet_forward(features_to_image(f), weights_, "embed.resnet", cfg_.resnet);
  const Tensor pooled = nn::global_stat_pool(flatten_frames(maps));
  const Tensor e = nn::affine(pooled, weights_, "embed.fc", pooled.size(), cfg_.embedding_dim);
  return e.vector();
}

Embedding EmbedNet::embed(const AudioBuffer& audio) const {
  const auto frames = num_frames(audio.samples.size(),
                                 static_cast<std::size_t>(std::lround(0.025 * audio.sample_rate)),
                                 static_cast<std::size_t>(std::lround(0.010 * audio.sample_rate)));
  if (frames < cfg_.min_frames)
    throw InputTooShortError("segment too short for embedding: " + std::to_string(frames) + " frames");
  return forward(mean_normalize(log_mel(audio, static_cast<int>(cfg_.n_mels))));
}

// ---------------------------------------------------------------------------
// Attentive vector-to-sequence scorer

V2sScorer::V2sScorer(V2sConfig cfg, WeightStore weights) : cfg_(cfg), weights_(std::move(weights)) {
  weights_.get("v2s.fc1.weight", {cfg_.proj_dim, cfg_.input_dim});
  nn::attention_weights(weights_, "v2s.att", cfg_.proj_dim, cfg_.att_units, cfg_.proj_dim, cfg_.heads);
  weights_.get("v2s.fc2.weight", {cfg_.hidden_dim, cfg_.proj_dim});
  weights_.get("v2s.fc3.weight", {1, cfg_.hidden_dim});
  if (cfg_.att_units % cfg_.heads != 0) throw ParameterError("attention units must divide into heads");
}

V2sScorer V2sScorer::random(V2sConfig cfg, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore w;
  init_affine(w, "v2s.fc1", cfg.input_dim, cfg.proj_dim, rng);
  for (const char* p : {"q", "k", "v"}) init_affine(w, std::string("v2s.att.") + p, cfg.proj_dim, cfg.att_units, rng);
  init_affine(w, "v2s.att.o", cfg.att_units, cfg.proj_dim, rng);
  init_affine(w, "v2s.fc2", cfg.proj_dim, cfg.hidden_dim, rng);
  init_affine(w, "v2s.fc3", cfg.hidden_dim, 1, rng);
  return V2sScorer(cfg, std::move(w));
}

void V2sScorer::check(const Tensor& rows) const {
  if (rows.rank() != 2 || rows.dim(1) != cfg_.input_dim)
    throw ShapeError("v2s rows must be [n, " + std::to_string(cfg_.input_dim) + "], got " +
                     shape_string(rows.dims()));
  if (rows.dim(0) == 0) throw EmptyInputError("v2s input has no rows");
}

std::vector<double> V2sScorer::forward_logits(const Tensor& rows) const {
  check(rows);
  const auto att = nn::attention_weights(weights_, "v2s.att", cfg_.proj_dim, cfg_.att_units, cfg_.proj_dim,
                                         cfg_.heads);
  Tensor h = nn::affine(rows, weights_, "v2s.fc1", cfg_.input_dim, cfg_.proj_dim);
  h = nn::multi_head_self_attention(h, att);
  h = nn::relu(nn::affine(h, weights_, "v2s.fc2", cfg_.proj_dim, cfg_.hidden_dim));
  return nn::affine(h, weights_, "v2s.fc3", cfg_.hidden_dim, 1).vector();
}

std::vector<double> V2sScorer::forward(const Tensor& rows) const {
  auto z = forward_logits(rows);
  for (double& v : z) v = nn::sigmoid(v);
  return z;
}

double V2sScorer::loss_and_gradient(const Tensor& rows, std::span<const double> targets,
                                    WeightStore* grad) const {
  check(rows);
  if (targets.size() != rows.dim(0)) throw ShapeError("one target per v2s row required");
  const auto& w1 = weights_.get("v2s.fc1.weight");
  const auto& w2 = weights_.get("v2s.fc2.weight");
  const auto& w3 = weights_.get("v2s.fc3.weight");
  const auto att = nn::attention_weights(weights_, "v2s.att", cfg_.proj_dim, cfg_.att_units, cfg_.proj_dim,
                                         cfg_.heads);

  const Tensor h1 = nn::affine(rows, w1, weights_.get("v2s.fc1.bias"));
  nn::AttentionCache cache;
  const Tensor h2 = nn::multi_head_self_attention(h1, att, &cache);
  const Tensor pre3 = nn::affine(h2, w2, weights_.get("v2s.fc2.bias"));
  const Tensor h3 = nn::relu(pre3);
  const Tensor logits = nn::affine(h3, w3, weights_.get("v2s.fc3.bias"));

  std::vector<double> dlogits;
  const double loss = nn::bce_with_logits(logits.values(), targets, grad ? &dlogits : nullptr);
  if (!grad) return loss;

  const Tensor dz({rows.dim(0), 1}, dlogits);
  auto g3 = nn::affine_backward(h3, w3, dz);
  auto g2 = nn::affine_backward(h2, w2, nn::relu_backward(pre3, g3.dx));
  auto ga = nn::attention_backward(h1, att, cache, g2.dx);
  auto g1 = nn::affine_backward(rows, w1, ga.dx);

  grad->set("v2s.fc1.weight", std::move(g1.dw));
  grad->set("v2s.fc1.bias", std::move(g1.db));
  grad->set("v2s.att.q.weight", std::move(ga.dw.wq));
  grad->set("v2s.att.q.bias", std::move(ga.dw.bq));
  grad->set("v2s.att.k.weight", std::move(ga.dw.wk));
  grad->set("v2s.att.k.bias", std::move(ga.dw.bk));
  grad->set("v2s.att.v.weight", std::move(ga.dw.wv));
  grad->set("v2s.att.v.bias", std::move(ga.dw.bv));
  grad->set("v2s.att.o.weight", std::move(ga.dw.wo));
  grad->set("v2s.att.o.bias", std::move(ga.dw.bo));
  grad->set("v2s.fc2.weight", std::move(g2.dw));
  grad->set("v2s.fc2.bias", std::move(g2.db));
  grad->set("v2s.fc3.weight", std::move(g3.dw));
  grad->set("v2s.fc3.bias", std::move(g3.db));
  return loss;
}

// ---------------------------------------------------------------------------
// Target-speaker VAD

TsvadNet::TsvadNet(TsvadNetConfig cfg, WeightStore weights) : cfg_(std::move(cfg)), weights_(std::move(weights)) {
  check_resnet(weights_, "tsvad.resnet", cfg_.resnet);
  for (const auto& s : cfg_.resnet.strides)
    if (s.h != 1) throw ParameterError("TSVAD front end must keep time stride 1");
  const std::size_t flat = cfg_.resnet.widths.back() * cfg_.resnet.output_bins(cfg_.n_mels);
  weights_.get("tsvad.fc_id.weight", {cfg_.identity_dim, flat});
  std::size_t in = cfg_.identity_dim + cfg_.embedding_dim;
  for (std::size_t l = 0; l < cfg_.lstm_layers; ++l) {
    nn::lstm_weights(weights_, "tsvad.lstm" + std::to_string(l + 1) + ".fwd", in, cfg_.lstm_hidden);
    in = 2 * cfg_.lstm_hidden;
  }
  weights_.get("tsvad.out.weight", {1, in});
}

TsvadNet TsvadNet::random(TsvadNetConfig cfg, std::uint64_t seed) {
  Rng rng(seed);
  WeightStore w;
  init_resnet(w, "tsvad.resnet", cfg.resnet, rng);
  const std::size_t flat = cfg.resnet.widths.back() * cfg.resnet.output_bins(cfg.n_mels);
  init_affine(w, "tsvad.fc_id", flat, cfg.identity_dim, rng);
  std::size_t in = cfg.identity_dim + cfg.embedding_dim;
  for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
    init_lstm(w, "tsvad.lstm" + std::to_string(l + 1), in, cfg.lstm_hidden, rng);
    in = 2 * cfg.lstm_hidden;
  }
  init_affine(w, "tsvad.out", in, 1, rng);
  return TsvadNet(std::move(cfg), std::move(w));
}

TsvadNet TsvadNet::from_embedder(const EmbedNet& embedder, TsvadNetConfig cfg, std::uint64_t seed) {
  TsvadNet net = random(std::move(cfg), seed);
  WeightStore w = net.weights_;
  copy_resnet_parameters(embedder.weights(), "embed", w, "tsvad");
  return TsvadNet(net.cfg_, std::move(w));
}

std::vector<double> TsvadNet::forward(const FeatureMatrix& f, const Embedding& target) const {
  check_bins(f, cfg_.n_mels, "TsvadNet");
  if (target.size() != cfg_.embedding_dim)
    throw ShapeError("target embedding has " + std::to_string(target.size()) + " dims, expected " +
                     std::to_string(cfg_.embedding_dim));
  if (f.frames == 0) throw EmptyInputError("TsvadNet input has no frames");
  const Tensor maps = resnet_forward(features_to_image(f), weights_, "tsvad.resnet", cfg_.resnet);
  const Tensor flat = flatten_frames(maps);
  const Tensor ident = nn::affine(flat, weights_, "tsvad.fc_id", flat.dim(1), cfg_.identity_dim);

  const std::size_t t_len = ident.dim(0), id = cfg_.identity_dim;
  Tensor h({t_len, id + target.size()});
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < id; ++j) h.at(t, j) = ident.at(t, j);
    for (std::size_t j = 0; j < target.size(); ++j) h.at(t, id + j) = target[j];
  }
  for (std::size_t l = 0; l < cfg_.lstm_layers; ++l)
    h = nn::bilstm_forward(h, weights_, "tsvad.lstm" + std::to_string(l + 1), cfg_.lstm_hidden);
  return nn::sigmoid(nn::affine(h, weights_, "tsvad.out", h.dim(1), 1)).vector();
}

std::vector<double> TsvadNet::track(const AudioBuffer& audio, const Embedding& target) const {
  return forward(mean_normalize(log_mel(audio, static_cast<int>(cfg_.n_mels))), target);
}

// ---------------------------------------------------------------------------

std::vector<double> arcface_logits(const Embedding& e, const Tensor& class_weights, std::size_t label, double s,
                                   double m) {
  if (class_weights.rank() != 2 || class_weights.dim(1) != e.size())
    throw ShapeError("class weights must be [K, " + std::to_string(e.size()) + "]");
  if (label >= class_weights.dim(0)) throw ParameterError("label out of range");
  double en = 0.0;
  for (double v : e) en += v * v;
  if (en == 0.0) throw NormalizationError("zero embedding");
  en = std::sqrt(en);

  std::vector<double> logits(class_weights.dim(0));
  for (std::size_t k = 0; k < logits.size(); ++k) {
    double dot = 0.0, wn = 0.0;
    for (std::size_t j = 0; j < e.size(); ++j) {
      dot += e[j] * class_weights.at(k, j);
      wn += class_weights.at(k, j) * class_weights.at(k, j);
    }
    if (wn == 0.0) throw NormalizationError("zero class weight row " + std::to_string(k));
    const double cosine = std::clamp(dot / (en * std::sqrt(wn)), -1.0, 1.0);
    logits[k] = k == label ? s * std::cos(std::acos(cosine) + m) : s * cosine;
  }
  return logits;
}

}  // namespace diarkit
