// src/cluster.cpp
#include "diarkit/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <thread>

#include "diarkit/error.hpp"
#include "diarkit/rng.hpp"

namespace diarkit {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: vector sizes differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NormalizationError("cosine_similarity: zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

bool SimilarityMatrix::is_symmetric(double tol) const {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(at(i, j) - at(j, i)) > tol) return false;
  return true;
}

Tensor build_v2s_input(const std::vector<Embedding>& xs, std::size_t i) {
  if (i >= xs.size()) throw ParameterError("v2s row index out of range");
  const std::size_t d = xs[i].size();
  Tensor rows({xs.size(), 2 * d});
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (xs[j].size() != d) throw ShapeError("embeddings of unequal dimension");
    std::copy(xs[i].begin(), xs[i].end(), rows.data() + j * 2 * d);
    std::copy(xs[j].begin(), xs[j].end(), rows.data() + j * 2 * d + d);
  }
  return rows;
}

SimilarityMatrix v2s_similarity_matrix(const std::vector<Embedding>& xs, const PairScorer& scorer,
                                       std::size_t threads) {
  const std::size_t n = xs.size();
  SimilarityMatrix s(n);
  auto run_rows = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < n; i += stride) {
      const auto row = scorer.score(build_v2s_input(xs, i));
      if (row.size() != n) throw ShapeError("pair scorer returned wrong row length");
      std::copy(row.begin(), row.end(), s.values.begin() + static_cast<std::ptrdiff_t>(i * n));
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    run_rows(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          run_rows(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (s.at(i, j) + s.at(j, i));
      s.at(i, j) = m;
      s.at(j, i) = m;
    }
  return s;
}

SimilarityMatrix cosine_similarity_matrix(const std::vector<Embedding>& xs) {
  SimilarityMatrix s(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      const double c = cosine_similarity(xs[i], xs[j]);
      s.at(i, j) = c;
      s.at(j, i) = c;
    }
  }
  return s;
}

SimilarityMatrix cosine_affinity(const std::vector<Embedding>& xs, AffinityMapping mapping) {
  SimilarityMatrix s = cosine_similarity_matrix(xs);
  for (double& v : s.values) v = mapping == AffinityMapping::kShift ? 0.5 * (v + 1.0) : std::max(v, 0.0);
  return s;
}

void write_similarity_matrix(std::ostream& out, const SimilarityMatrix& s) {
  char buf[32];
  for (std::size_t i = 0; i < s.n; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", s.at(i, j));
      if (j) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

std::size_t Clustering::num_clusters() const {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<Embedding> compute_centers(const std::vector<Embedding>& xs, const std::vector<std::size_t>& labels) {
  if (xs.size() != labels.size()) throw ShapeError("one label per embedding required");
  const std::size_t k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<Embedding> centers(k, Embedding(xs.empty() ? 0 : xs[0].size(), 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    auto& c = centers[labels[i]];
    for (std::size_t j = 0; j < c.size(); ++j) c[j] += xs[i][j];
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c])
      for (double& v : centers[c]) v /= static_cast<double>(counts[c]);
  return centers;
}

// ---------------------------------------------------------------------------
// Spectral clustering

SymmetricEigen jacobi_eigen(std::vector<double> a, std::size_t n, double tol, std::size_t max_sweeps) {
  if (a.size() != n * n) throw ShapeError("jacobi_eigen: matrix size mismatch");
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a[i * n + j] * a[i * n + j];
    return std::sqrt(s);
  };

  for (std::size_t sweep = 0; sweep < max_sweeps && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p], aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p], vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x * n + x] < a[y * n + y]; });
  SymmetricEigen out;
  out.n = n;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a[order[c] * n + order[c]];
    for (std::size_t r = 0; r < n; ++r) out.vectors[r * n + c] = v[r * n + order[c]];
  }
  return out;
}

std::vector<double> normalized_laplacian(const SimilarityMatrix& s) {
  const std::size_t n = s.n;
  for (double v : s.values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError("affinity entries must be finite and non-negative");
  if (!s.is_symmetric(1e-12)) throw PreconditionError("affinity matrix must be symmetric");
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += s.at(i, j);
    if (d <= 0.0) throw DegenerateGraphError("node " + std::to_string(i) + " has zero degree");
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  std::vector<double> lap(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      lap[i * n + j] = (i == j ? 1.0 : 0.0) - inv_sqrt_deg[i] * s.at(i, j) * inv_sqrt_deg[j];
  return lap;
}

std::size_t eigengap_count(const std::vector<double>& ascending, std::size_t max_k) {
  const std::size_t n = ascending.size();
  if (n <= 1) return n;
  const std::size_t limit = std::min(max_k, n - 1);
  std::size_t best = 1;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= limit; ++k) {
    const double gap = ascending[k] - ascending[k - 1];
    if (gap > best_gap) {
      best_gap = gap;
      best = k;
    }
  }
  return best;
}

std::vector<std::size_t> canonical_labels(const std::vector<std::size_t>& labels) {
  std::vector<std::size_t> map;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= map.size()) map.resize(labels[i] + 1, SIZE_MAX);
    if (map[labels[i]] == SIZE_MAX) {
      std::size_t next = 0;
      for (auto m : map)
        if (m != SIZE_MAX) ++next;
      map[labels[i]] = next;
    }
    out[i] = map[labels[i]];
  }
  return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

KMeansResult kmeans_once(const std::vector<std::vector<double>>& pts, std::size_t k, Rng& rng) {
  const std::size_t n = pts.size(), d = pts[0].size();
  std::vector<std::vector<double>> centers;
  centers.push_back(pts[rng.index(n)]);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], sq_dist(pts[i], centers.back()));
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (pick = 0; pick + 1 < n && r >= dist[pick]; ++pick) r -= dist[pick];
    } else {
      pick = rng.index(n);
    }
    centers.push_back(pts[pick]);
  }

  std::vector<std::size_t> labels(n, SIZE_MAX);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double bd = sq_dist(pts[i], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double dd = sq_dist(pts[i], centers[c]);
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) sums[labels[i]][j] += pts[i][j];
      ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Re-seed an empty cluster at the point farthest from its centre.
        std::size_t far = 0;
        double fd = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dd = sq_dist(pts[i], centers[labels[i]]);
          if (dd > fd) {
            fd = dd;
            far = i;
          }
        }
        centers[c] = pts[far];
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }
  }
  KMeansResult r;
  r.labels = labels;
  for (std::size_t i = 0; i < n; ++i) r.inertia += sq_dist(pts[i], centers[labels[i]]);
  return r;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::size_t restarts,
                    std::uint64_t seed) {
  if (points.empty()) throw EmptyInputError("kmeans on no points");
  if (k == 0 || k > points.size()) throw ParameterError("kmeans needs 1 <= k <= n");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Rng rng(seed * 1000003ULL + r);
    auto res = kmeans_once(points, k, rng);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  best.labels = canonical_labels(best.labels);
  return best;
}

SpectralResult spectral_cluster(const SimilarityMatrix& s, const SpectralOptions& opts) {
  if (s.n == 0) throw EmptyInputError("spectral clustering on an empty matrix");
  const auto eig = jacobi_eigen(normalized_laplacian(s), s.n, opts.jacobi_tol);
  SpectralResult out;
  out.eigenvalues = eig.values;
  out.k = opts.k ? *opts.k : eigengap_count(eig.values, opts.max_speakers);
  if (out.k == 0 || out.k > s.n) throw ParameterError("cluster count out of range");

  std::vector<std::vector<double>> rows(s.n, std::vector<double>(out.k));
  for (std::size_t i = 0; i < s.n; ++i) {
    double norm = 0.0;
    for (std::size_t c = 0; c < out.k; ++c) {
      rows[i][c] = eig.vector(i, c);
      norm += rows[i][c] * rows[i][c];
    }
    if (norm > 0.0)
      for (double& v : rows[i]) v /= std::sqrt(norm);
  }
  out.clustering.labels = kmeans(rows, out.k, opts.restarts, opts.seed).labels;
  return out;
}

// ---------------------------------------------------------------------------
// Telephone path

Clustering ahc(const std::vector<Embedding>& xs, double stop_threshold) {
  struct Cluster {
    std::vector<std::size_t> members;
    Embedding sum;
    Embedding center;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < xs.size(); ++i) clusters.push_back({{i}, xs[i], xs[i]});

  const std::size_t n = clusters.size();
  std::vector<double> sim(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sim[i * n + j] = cosine_similarity(xs[i], xs[j]);
  // alive[k] indexes the slot of the k-th live cluster in `sim`.
  std::vector<std::size_t> alive(n);
  std::iota(alive.begin(), alive.end(), std::size_t{0});

  while (alive.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < alive.size(); ++a)
      for (std::size_t b = a + 1; b < alive.size(); ++b) {
        const double v = sim[alive[a] * n + alive[b]];
        if (v > best) {
          best = v;
          bi = a;
          bj = b;
        }
      }
    if (!(best >= stop_threshold)) break;

    Cluster& keep = clusters[alive[bi]];
    Cluster& gone = clusters[alive[bj]];
    keep.members.insert(keep.members.end(), gone.members.begin(), gone.members.end());
    for (std::size_t d = 0; d < keep.sum.size(); ++d) keep.sum[d] += gone.sum[d];
    for (std::size_t d = 0; d < keep.sum.size(); ++d)
      keep.center[d] = keep.sum[d] / static_cast<double>(keep.members.size());
    alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(bj));

    const std::size_t slot = alive[bi];
    for (std::size_t other : alive) {
      if (other == slot) continue;
      const double v = cosine_similarity(keep.center, clusters[other].center);
      sim[std::min(slot, other) * n + std::max(slot, other)] = v;
    }
  }

  Clustering out;
  out.labels.assign(xs.size(), 0);
  for (std::size_t k = 0; k < alive.size(); ++k) {
    for (std::size_t m : clusters[alive[k]].members) out.labels[m] = k;
    out.centers.push_back(clusters[alive[k]].center);
  }
  return out;
}

Clustering ahc(const std::vector<EmbeddedSegment>& segs, double stop_threshold) {
  std::vector<Embedding> xs;
  xs.reserve(segs.size());
  for (const auto& s : segs) xs.push_back(s.embedding);
  return ahc(xs, stop_threshold);
}

TwoSpeakerSelection select_two_speakers(const std::vector<EmbeddedSegment>& segs, const Clustering& c) {
  const std::size_t k = c.num_clusters();
  if (k < 2) throw InsufficientSpeakersError("need at least two clusters, got " + std::to_string(k));
  if (c.labels.size() != segs.size()) throw ShapeError("one label per segment required");
  std::vector<double> dur(k, 0.0);
  for (std::size_t i = 0; i < segs.size(); ++i) dur[c.labels[i]] += segs[i].segment.duration();
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dur[a] > dur[b]; });

  TwoSpeakerSelection sel;
  sel.cluster_a = order[0];
  sel.cluster_b = order[1];
  std::vector<Embedding> centers = c.centers;
  if (centers.size() != k) {
    std::vector<Embedding> xs;
    for (const auto& s : segs) xs.push_back(s.embedding);
    centers = compute_centers(xs, c.labels);
  }
  sel.center_a = centers[sel.cluster_a];
  sel.center_b = centers[sel.cluster_b];
  for (std::size_t i = 0; i < segs.size(); ++i)
    if (c.labels[i] != sel.cluster_a && c.labels[i] != sel.cluster_b) sel.remaining.push_back(i);
  return sel;
}

OverlapAssignment assign_with_overlap(const std::vector<EmbeddedSegment>& segs, const Embedding& center_a,
                                      const Embedding& center_b, double threshold) {
  OverlapAssignment out;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double sa = cosine_similarity(segs[i].embedding, center_a);
    const double sb = cosine_similarity(segs[i].embedding, center_b);
    if (std::min(sa, sb) > threshold) {
      out.speaker_a.push_back(i);
      out.speaker_b.push_back(i);
    } else if (sa >= sb) {
      out.speaker_a.push_back(i);
    } else {
      out.speaker_b.push_back(i);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation and training

std::vector<double> random_rotation(std::size_t dim, Rng& rng) {
  // Columns of a Gaussian matrix, orthonormalized by two passes of modified
  // Gram-Schmidt (R then has a positive diagonal).
  std::vector<std::vector<double>> cols(dim, std::vector<double>(dim));
  for (auto& c : cols)
    for (double& v : c) v = rng.gaussian();
  for (std::size_t j = 0; j < dim; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < j; ++i) {
        double dot = 0.0;
        for (std::size_t r = 0; r < dim; ++r) dot += cols[i][r] * cols[j][r];
        for (std::size_t r = 0; r < dim; ++r) cols[j][r] -= dot * cols[i][r];
      }
    double norm = 0.0;
    for (double v : cols[j]) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : cols[j]) v /= norm;
  }
  std::vector<double> q(dim * dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) q[r * dim + c] = cols[c][r];
  return q;
}

std::vector<Embedding> diaconis_augment(const std::vector<Embedding>& xs, std::uint64_t seed, double prob) {
  if (xs.empty()) throw EmptyInputError("diaconis_augment on an empty sequence");
  Rng rng(seed);
  if (!(rng.uniform() < prob)) return xs;
  const std::size_t d = xs[0].size();
  const auto q = random_rotation(d, rng);
  std::vector<Embedding> out(xs.size(), Embedding(d, 0.0));
  for (std::size_t n = 0; n < xs.size(); ++n)
    for (std::size_t r = 0; r < d; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += q[r * d + c] * xs[n][c];
      out[n][r] = s;
    }
  return out;
}

std::vector<double> v2s_targets(const V2sSequence& seq, std::size_t i) {
  std::vector<double> t(seq.speakers.size());
  for (std::size_t j = 0; j < t.size(); ++j) t[j] = seq.speakers[i] == seq.speakers[j] ? 1.0 : 0.0;
  return t;
}

double v2s_pair_accuracy(const V2sScorer& scorer, const std::vector<V2sSequence>& data) {
  std::size_t correct = 0, total = 0;
  for (const auto& seq : data)
    for (std::size_t i = 0; i < seq.embeddings.size(); ++i) {
      const auto p = scorer.forward(build_v2s_input(seq.embeddings, i));
      const auto t = v2s_targets(seq, i);
      for (std::size_t j = 0; j < p.size(); ++j) {
        correct += (p[j] >= 0.5) == (t[j] == 1.0);
        ++total;
      }
    }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

double v2s_dataset_loss(const V2sScorer& scorer, const std::vector<V2sSequence>& data) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& seq : data)
    for (std::size_t i = 0; i < seq.embeddings.size(); ++i) {
      sum += scorer.loss_and_gradient(build_v2s_input(seq.embeddings, i), v2s_targets(seq, i), nullptr);
      ++count;
    }
  return count ? sum / static_cast<double>(count) : 0.0;
}

V2sTrainReport train_v2s_toy(V2sScorer& scorer, const std::vector<V2sSequence>& data, const V2sTrainOptions& opts) {
  for (const auto& seq : data) {
    if (seq.embeddings.size() != seq.speakers.size() || seq.embeddings.empty())
      throw ParameterError("each training sequence needs one speaker label per embedding");
  }
  std::vector<std::pair<std::size_t, std::size_t>> items;
  for (std::size_t s = 0; s < data.size(); ++s)
    for (std::size_t i = 0; i < data[s].embeddings.size(); ++i) items.emplace_back(s, i);

  Rng rng(opts.seed);
  double lr = opts.learning_rate;
  V2sTrainReport report;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    if (std::find(opts.decay_epochs.begin(), opts.decay_epochs.end(), epoch) != opts.decay_epochs.end())
      lr *= opts.decay_factor;
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.index(i)]);

    double epoch_loss = 0.0;
    for (const auto& [s, i] : items) {
      const auto& seq = data[s];
      const auto xs = opts.augment_prob > 0.0 ? diaconis_augment(seq.embeddings, rng.next(), opts.augment_prob)
                                              : seq.embeddings;
      WeightStore grad;
      const double loss = scorer.loss_and_gradient(build_v2s_input(xs, i), v2s_targets(seq, i), &grad);
      if (!std::isfinite(loss))
        throw NumericError("v2s training diverged at epoch " + std::to_string(epoch) +
                           "; try a smaller learning rate");
      epoch_loss += loss;
      if (lr == 0.0) continue;
      for (auto& [name, g] : grad.entries()) {
        Tensor& w = scorer.mutable_weights().mutable_get(name);
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * g[k];
      }
    }
    report.loss_trace.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(items.size(), 1)));
    report.epochs_run = epoch + 1;
    if (opts.stop_accuracy > 0.0 && report.loss_trace.back() < opts.stop_loss &&
        v2s_pair_accuracy(scorer, data) > opts.stop_accuracy)
      break;
  }
  report.final_accuracy = v2s_pair_accuracy(scorer, data);
  return report;
}

}  // namespace diarkit
