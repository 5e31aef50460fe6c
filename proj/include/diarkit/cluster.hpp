// include/diarkit/cluster.hpp
//
// Similarity measurement and clustering of segment embeddings:
//   - cosine scoring and attentive vector-to-sequence (v2s) scoring, where row
//     i of the similarity matrix is the scorer's output on the sequence of
//     pairs [x_i ; x_j], j = 1..n;
//   - spectral clustering with eigengap speaker counting (wide-band path);
//   - centroid AHC, two-speaker selection and overlap assignment (telephone path);
//   - rotation augmentation and small-scale SGD training of the v2s scorer.
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "diarkit/models.hpp"
#include "diarkit/rng.hpp"
#include "diarkit/tensor.hpp"
#include "diarkit/types.hpp"

namespace diarkit {

// Throws NormalizationError for a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major n x n

  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t size, double fill = 0.0) : n(size), values(size * size, fill) {}
  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  bool is_symmetric(double tol = 0.0) const;
};

// Row j = [x_i ; x_j].
Tensor build_v2s_input(const std::vector<Embedding>& xs, std::size_t i);

// Runs the scorer once per row, then symmetrizes (S + S^T) / 2. Rows are
// independent; `threads` > 1 evaluates them concurrently with identical results.
SimilarityMatrix v2s_similarity_matrix(const std::vector<Embedding>& xs, const PairScorer& scorer,
                                       std::size_t threads = 1);

SimilarityMatrix cosine_similarity_matrix(const std::vector<Embedding>& xs);

// Maps cosine scores to non-negative affinities for spectral clustering.
enum class AffinityMapping {
  kShift,  // (s + 1) / 2
  kClip,   // max(s, 0)
};
SimilarityMatrix cosine_affinity(const std::vector<Embedding>& xs, AffinityMapping mapping = AffinityMapping::kClip);

// Plain text, one row per line, 9 significant digits.
void write_similarity_matrix(std::ostream& out, const SimilarityMatrix& s);

struct Clustering {
  std::vector<std::size_t> labels;  // per segment, 0..k-1 in order of first appearance
  std::vector<Embedding> centers;   // per cluster member mean (empty when unknown)

  std::size_t num_clusters() const;
};

std::vector<Embedding> compute_centers(const std::vector<Embedding>& xs, const std::vector<std::size_t>& labels);

struct SymmetricEigen {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // n x n, column c is the eigenvector of values[c]
  std::size_t n = 0;
  double vector(std::size_t row, std::size_t col) const { return vectors[row * n + col]; }
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is <= tol.
SymmetricEigen jacobi_eigen(std::vector<double> matrix, std::size_t n, double tol = 1e-10,
                            std::size_t max_sweeps = 100);

// I - D^{-1/2} S D^{-1/2}. Throws on asymmetric or negative input and on
// zero-degree nodes.
std::vector<double> normalized_laplacian(const SimilarityMatrix& s);

// argmax_{k in 1..min(max_k, n-1)} (lambda_{k+1} - lambda_k) over ascending eigenvalues.
std::size_t eigengap_count(const std::vector<double>& ascending, std::size_t max_k);

struct KMeansResult {
  std::vector<std::size_t> labels;
  double inertia = 0.0;
};

// k-means++ seeding, Lloyd iterations; best inertia over `restarts`.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::size_t restarts = 20,
                    std::uint64_t seed = 0);

// Relabels to 0..k-1 in order of first appearance.
std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& labels);

struct SpectralOptions {
  std::size_t max_speakers = 8;
  std::optional<std::size_t> k;
  std::size_t restarts = 20;
  std::uint64_t seed = 0;
  double jacobi_tol = 1e-10;
};

struct SpectralResult {
  Clustering clustering;
  std::vector<double> eigenvalues;
  std::size_t k = 0;
};

SpectralResult spectral_cluster(const SimilarityMatrix& s, const SpectralOptions& opts = {});

inline constexpr double kAhcStopThreshold = 0.6;
inline constexpr double kOverlapThreshold = 0.0;

// Agglomerates while the most similar pair of cluster centres has cosine
// similarity >= stop_threshold; centres are member means; ties go to the
// lowest index pair.
Clustering ahc(const std::vector<Embedding>& xs, double stop_threshold = kAhcStopThreshold);
Clustering ahc(const std::vector<EmbeddedSegment>& segs, double stop_threshold = kAhcStopThreshold);

struct TwoSpeakerSelection {
  std::size_t cluster_a = 0;
  std::size_t cluster_b = 0;
  Embedding center_a;
  Embedding center_b;
  std::vector<std::size_t> remaining;  // segment indices outside both clusters
};

// The two clusters with the largest total member duration.
TwoSpeakerSelection select_two_speakers(const std::vector<EmbeddedSegment>& segs, const Clustering& c);

struct OverlapAssignment {
  std::vector<std::size_t> speaker_a;  // indices into the input
  std::vector<std::size_t> speaker_b;
};

// Both speakers when min(s_a, s_b) > threshold, else the more similar one
// (speaker A on ties).
OverlapAssignment assign_with_overlap(const std::vector<EmbeddedSegment>& segs, const Embedding& center_a,
                                      const Embedding& center_b, double threshold = kOverlapThreshold);

// Haar-random orthogonal matrix (QR of a Gaussian matrix, positive R diagonal), row-major.
std::vector<double> random_rotation(std::size_t dim, Rng& rng);

// With probability `prob` every embedding is multiplied by one shared random
// rotation; otherwise the input is returned unchanged.
std::vector<Embedding> diaconis_augment(const std::vector<Embedding>& xs, std::uint64_t seed, double prob = 0.5);

// One embedding sequence with its speaker labels.
struct V2sSequence {
  std::vector<Embedding> embeddings;
  std::vector<int> speakers;
};

struct V2sTrainOptions {
  double learning_rate = 0.01;
  std::size_t epochs = 200;
  // Learning rate is multiplied by decay_factor at each listed epoch.
  std::vector<std::size_t> decay_epochs;
  double decay_factor = 0.1;
  double augment_prob = 0.5;
  std::uint64_t seed = 0;
  // Stop once an epoch ends with mean loss below this and accuracy above
  // stop_accuracy (checked only when stop_accuracy > 0).
  double stop_loss = 0.0;
  double stop_accuracy = 0.0;
};

struct V2sTrainReport {
  std::vector<double> loss_trace;  // mean training BCE per epoch
  std::size_t epochs_run = 0;
  double final_accuracy = 0.0;
};

// Targets for row i: same(i, j) for every j.
std::vector<double> v2s_targets(const V2sSequence& seq, std::size_t i);
double v2s_pair_accuracy(const V2sScorer& scorer, const std::vector<V2sSequence>& data);
double v2s_dataset_loss(const V2sScorer& scorer, const std::vector<V2sSequence>& data);

// Plain SGD on per-row BCE. Throws NumericError if the loss becomes non-finite.
V2sTrainReport train_v2s_toy(V2sScorer& scorer, const std::vector<V2sSequence>& data,
                             const V2sTrainOptions& opts = {});

}  // namespace diarkit
