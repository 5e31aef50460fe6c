// include/diarkit/models.hpp
//
// Network assemblies built from nn layers, and the abstract interfaces the
// pipeline stages consume (so tests and tone-coded runs can swap in stubs).
//
// Weight names, relative to each model's prefix ("vad", "embed", "v2s", "tsvad"):
//   resnet.stem.conv.kernel, resnet.stem.bn.{gamma,beta,mean,var}
//   resnet.stage{s}.block{b}.{conv1,conv2}.kernel, .{bn1,bn2}.{gamma,beta,mean,var}
//   resnet.stage{s}.block{b}.shortcut.conv.kernel, .shortcut.bn.*   (projection blocks)
//   lstm{l}.{fwd,bwd}.{w_ih,w_hh,bias}
//   {fc*,out,fc_id}.{weight,bias};  att.{q,k,v,o}.{weight,bias}
// Stages and blocks are numbered from 1.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diarkit/dsp.hpp"
#include "diarkit/layers.hpp"
#include "diarkit/rng.hpp"
#include "diarkit/tensor.hpp"
#include "diarkit/types.hpp"

namespace diarkit {

// Frame-level speech probabilities for a window of log-Mel features.
class SpeechDetector {
 public:
  virtual ~SpeechDetector() = default;
  virtual std::vector<double> predict(const FeatureMatrix& window) const = 0;
  virtual int n_mels() const { return 32; }
};

class SpeakerEmbedder {
 public:
  virtual ~SpeakerEmbedder() = default;
  virtual Embedding embed(const AudioBuffer& audio) const = 0;
};

// Per-frame probability (10 ms hop, 25 ms frames) that `target` is talking.
class TargetDetector {
 public:
  virtual ~TargetDetector() = default;
  virtual std::vector<double> track(const AudioBuffer& audio, const Embedding& target) const = 0;
};

// Scores every row of an [n, 2 * dim] pair sequence.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual std::vector<double> score(const Tensor& rows) const = 0;
};

// ---------------------------------------------------------------------------

struct ResNetConfig {
  std::vector<std::size_t> widths;
  std::vector<std::size_t> blocks;
  std::vector<nn::Stride2> strides;
  std::size_t in_channels = 1;

  // Frequency extent after all stages for an input of `bins`.
  std::size_t output_bins(std::size_t bins) const;
  std::size_t output_frames(std::size_t frames) const;
};

ResNetConfig resnet18_vad();    // widths {16,32,64,128}, strides {(1,1),(1,2),(1,2),(1,2)}
ResNetConfig resnet34_embed();  // widths {32,64,128,256}, blocks {3,4,6,3}

void init_resnet(WeightStore& store, const std::string& prefix, const ResNetConfig& cfg, Rng& rng);
// x [C_in, T, F] -> [C_last, T', F'].
Tensor resnet_forward(const Tensor& x, const WeightStore& store, const std::string& prefix,
                      const ResNetConfig& cfg);

// Uniform(-sqrt(6 / fan_in), +sqrt(6 / fan_in)), rounded to binary32.
Tensor he_uniform(std::vector<std::size_t> dims, std::size_t fan_in, Rng& rng);

// [T, F] features as a single-channel [1, T, F] image.
Tensor features_to_image(const FeatureMatrix& f);

// ---------------------------------------------------------------------------

struct VadNetConfig {
  ResNetConfig resnet = resnet18_vad();
  std::size_t n_mels = 32;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;
  std::size_t fc_hidden = 64;
};

class VadNet : public SpeechDetector {
 public:
  VadNet(VadNetConfig cfg, WeightStore weights);
  static VadNet random(VadNetConfig cfg, std::uint64_t seed);

  // f [T, n_mels] -> T probabilities.
  std::vector<double> forward(const FeatureMatrix& f) const;
  std::vector<double> predict(const FeatureMatrix& window) const override { return forward(window); }
  int n_mels() const override { return static_cast<int>(cfg_.n_mels); }

  const WeightStore& weights() const { return weights_; }
  const VadNetConfig& config() const { return cfg_; }

 private:
  VadNetConfig cfg_;
  WeightStore weights_;
};

struct EmbedNetConfig {
  ResNetConfig resnet = resnet34_embed();
  std::size_t n_mels = 80;
  std::size_t embedding_dim = kEmbeddingDim;
  std::size_t min_frames = 25;
};

class EmbedNet : public SpeakerEmbedder {
 public:
  EmbedNet(EmbedNetConfig cfg, WeightStore weights);
  static EmbedNet random(EmbedNetConfig cfg, std::uint64_t seed);

  // f [T, n_mels] -> embedding. Throws InputTooShortError below min_frames.
  Embedding forward(const FeatureMatrix& f) const;
  // log-Mel, mean normalization, forward.
  Embedding embed(const AudioBuffer& audio) const override;

  const WeightStore& weights() const { return weights_; }
  const EmbedNetConfig& config() const { return cfg_; }

 private:
  EmbedNetConfig cfg_;
  WeightStore weights_;
};

struct V2sConfig {
  std::size_t input_dim = 2 * kEmbeddingDim;
  std::size_t proj_dim = 256;
  std::size_t att_units = 128;
  std::size_t heads = 2;
  std::size_t hidden_dim = 1024;
};

// Pair rows -> affine(proj) -> self-attention -> affine(hidden) + ReLU ->
// affine(1) -> sigmoid.
class V2sScorer : public PairScorer {
 public:
  V2sScorer(V2sConfig cfg, WeightStore weights);
  static V2sScorer random(V2sConfig cfg, std::uint64_t seed);

  std::vector<double> forward_logits(const Tensor& rows) const;
  std::vector<double> forward(const Tensor& rows) const;
  std::vector<double> score(const Tensor& rows) const override { return forward(rows); }

  // Mean BCE over the rows and its gradient, keyed like weights().
  double loss_and_gradient(const Tensor& rows, std::span<const double> targets,
                           WeightStore* grad) const;

  const WeightStore& weights() const { return weights_; }
  WeightStore& mutable_weights() { return weights_; }
  const V2sConfig& config() const { return cfg_; }

 private:
  void check(const Tensor& rows) const;

  V2sConfig cfg_;
  WeightStore weights_;
};

struct TsvadNetConfig {
  ResNetConfig resnet = [] {
    ResNetConfig r = resnet34_embed();
    for (auto& s : r.strides) s.h = 1;  // keep frame resolution
    return r;
  }();
  std::size_t n_mels = 80;
  std::size_t identity_dim = kEmbeddingDim;
  std::size_t embedding_dim = kEmbeddingDim;
  std::size_t lstm_hidden = 128;
  std::size_t lstm_layers = 2;
};

class TsvadNet : public TargetDetector {
 public:
  TsvadNet(TsvadNetConfig cfg, WeightStore weights);
  static TsvadNet random(TsvadNetConfig cfg, std::uint64_t seed);
  // Random detector whose ResNet parameters are copied from `embedder`.
  static TsvadNet from_embedder(const EmbedNet& embedder, TsvadNetConfig cfg, std::uint64_t seed);

  // f [T, n_mels], target -> T probabilities.
  std::vector<double> forward(const FeatureMatrix& f, const Embedding& target) const;
  std::vector<double> track(const AudioBuffer& audio, const Embedding& target) const override;

  const WeightStore& weights() const { return weights_; }
  const TsvadNetConfig& config() const { return cfg_; }

 private:
  TsvadNetConfig cfg_;
  WeightStore weights_;
};

// Copies `{from}.resnet.*` of `src` into `{to}.resnet.*` of `dst`.
std::size_t copy_resnet_parameters(const WeightStore& src, const std::string& from, WeightStore& dst,
                                   const std::string& to);

inline constexpr double kArcFaceScale = 32.0;
inline constexpr double kArcFaceMargin = 0.2;

// s * cos(theta_k), with the label's angle widened by m.
std::vector<double> arcface_logits(const Embedding& e, const Tensor& class_weights, std::size_t label,
                                   double s = kArcFaceScale, double m = kArcFaceMargin);

}  // namespace diarkit
