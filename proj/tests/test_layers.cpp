// tests/test_layers.cpp
#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "diarkit/error.hpp"
#include "diarkit/layers.hpp"
#include "diarkit/tensor.hpp"
#include "layer_checks.hpp"
#include "oracles.hpp"

namespace diarkit {
namespace {

using nn::Padding;

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  const Tensor x = oracle::random_tensor({3, 5, 6}, rng);
  Tensor k({3, 3, 1, 1});
  for (std::size_t c = 0; c < 3; ++c) k[(c * 3 + c)] = 1.0;
  EXPECT_EQ(nn::conv2d(x, k, {1, 1}, Padding::kSame), x);
  EXPECT_EQ(nn::conv2d(x, k, {1, 1}, Padding::kValid), x);
}

TEST(Conv2d, OnesKernelSumsWindow) {
  const Tensor x({1, 6, 7}, 1.0);
  const Tensor k({1, 1, 3, 3}, 1.0);
  const Tensor y = nn::conv2d(x, k, {1, 1}, Padding::kValid);
  ASSERT_EQ(y.dims(), (std::vector<std::size_t>{1, 4, 5}));
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], 9.0);
  const Tensor s = nn::conv2d(x, k, {1, 1}, Padding::kSame);
  EXPECT_DOUBLE_EQ(s.at(0, 0, 0), 4.0);  // corner sees a 2x2 window
  EXPECT_DOUBLE_EQ(s.at(0, 2, 3), 9.0);
}

TEST(Conv2d, StridedMatchesOracle) {
  Rng rng(2);
  const Tensor x = oracle::random_tensor({1, 4, 4}, rng);
  const Tensor k = oracle::random_tensor({1, 1, 2, 2}, rng);
  const Tensor y = nn::conv2d(x, k, {2, 2}, Padding::kValid);
  ASSERT_EQ(y.dims(), (std::vector<std::size_t>{1, 2, 2}));
  EXPECT_LT(oracle::max_abs_diff(y, oracle::conv2d(x, k, 2, 2, false)), 1e-6);
}

TEST(Conv2d, BiasAndShapeErrors) {
  const Tensor x({2, 3, 3}, 1.0);
  const Tensor k({4, 2, 1, 1}, 0.0);
  const Tensor b({4}, 0.25);
  const Tensor y = nn::conv2d(x, k, {1, 1}, Padding::kValid, &b);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], 0.25);
  EXPECT_THROW(nn::conv2d(x, Tensor({4, 3, 1, 1}), {1, 1}, Padding::kValid), ShapeError);
  EXPECT_THROW(nn::conv2d(x, Tensor({1, 2, 5, 5}), {1, 1}, Padding::kValid), ShapeError);
}

TEST(Conv2d, RandomShapesMatchOracle) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) EXPECT_LT(layer_checks::conv_trial(rng), 1e-5);
}

TEST(BatchNorm, Examples) {
  Rng rng(4);
  const Tensor x = oracle::random_tensor({2, 3, 4}, rng);
  const Tensor ones({2}, 1.0), zeros({2}, 0.0);
  const Tensor y = nn::batch_norm_infer(x, ones, zeros, zeros, ones);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i] / std::sqrt(1.0 + 1e-5), 1e-15);
  EXPECT_LT(oracle::max_abs_diff(y, x), 1e-5);

  const Tensor mean({2}, std::vector<double>{0.3, -0.7});
  Tensor xm({2, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) xm[i] = 0.3, xm[4 + i] = -0.7;
  const Tensor beta({2}, std::vector<double>{1.5, -2.0});
  const Tensor z = nn::batch_norm_infer(xm, Tensor({2}, 3.0), beta, mean, Tensor({2}, 0.5));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(z[i], 1.5);
    EXPECT_DOUBLE_EQ(z[4 + i], -2.0);
  }
  EXPECT_THROW(nn::batch_norm_infer(x, Tensor({3}), zeros, zeros, ones), ShapeError);
}

TEST(BatchNorm, RandomMatchesOracle) {
  Rng rng(5);
  for (int i = 0; i < 50; ++i) EXPECT_LT(layer_checks::batch_norm_trial(rng), 1e-7);
}

TEST(Lstm, ZeroWeightsGiveZeroOutput) {
  Rng rng(6);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(layer_checks::zero_bilstm_trial(rng), 0.0);
}

TEST(Lstm, SingleStepHalvesAgreeForSharedParameters) {
  Rng rng(7);
  const auto w = layer_checks::random_lstm(rng, 3, 4);
  const Tensor x = oracle::random_tensor({1, 3}, rng);
  const Tensor y = nn::bilstm_forward(x, w, w);
  for (std::size_t u = 0; u < 4; ++u) EXPECT_DOUBLE_EQ(y.at(0, u), y.at(0, 4 + u));
  // Hand computation of one step from zero state.
  const Tensor ref = oracle::lstm(x, w.w_ih, w.w_hh, w.bias, false);
  for (std::size_t u = 0; u < 4; ++u) EXPECT_NEAR(y.at(0, u), ref.at(0, u), 1e-12);
}

TEST(Lstm, TimeReversalSymmetry) {
  Rng rng(8);
  const auto fwd = layer_checks::random_lstm(rng, 3, 2), bwd = layer_checks::random_lstm(rng, 3, 2);
  const Tensor x = oracle::random_tensor({7, 3}, rng);
  Tensor xr({7, 3});
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t j = 0; j < 3; ++j) xr.at(t, j) = x.at(6 - t, j);
  // Swapping the directions' parameters and reversing time swaps the halves.
  const Tensor y = nn::bilstm_forward(x, fwd, bwd);
  const Tensor yr = nn::bilstm_forward(xr, bwd, fwd);
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t u = 0; u < 2; ++u) {
      EXPECT_NEAR(yr.at(t, u), y.at(6 - t, 2 + u), 1e-12);
      EXPECT_NEAR(yr.at(t, 2 + u), y.at(6 - t, u), 1e-12);
    }
}

TEST(Lstm, RandomShapesMatchOracle) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) EXPECT_LT(layer_checks::bilstm_trial(rng), 1e-5);
}

TEST(Lstm, StoreLookupChecksShapes) {
  Rng rng(10);
  WeightStore s;
  const auto w = layer_checks::random_lstm(rng, 3, 2);
  for (const char* dir : {"l.fwd", "l.bwd"}) {
    s.set(std::string(dir) + ".w_ih", w.w_ih);
    s.set(std::string(dir) + ".w_hh", w.w_hh);
    s.set(std::string(dir) + ".bias", w.bias);
  }
  const Tensor x = oracle::random_tensor({5, 3}, rng);
  EXPECT_EQ(nn::bilstm_forward(x, s, "l", 2), nn::bilstm_forward(x, w, w));
  EXPECT_THROW(nn::bilstm_forward(x, s, "l", 3), ShapeError);
  EXPECT_THROW(nn::bilstm_forward(oracle::random_tensor({5, 4}, rng), w, w), ShapeError);
}

TEST(Attention, RowsSumToOneAndMatchOracle) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const auto r = layer_checks::attention_trial(rng);
    EXPECT_LT(r.max_error, 1e-5);
    EXPECT_LT(r.max_row_sum_error, 1e-6);
  }
}

TEST(Attention, SinglePositionOutputsProjectedValue) {
  Rng rng(12);
  const auto w = layer_checks::random_attention(rng, 5, 8, 3, 2);
  const Tensor x = oracle::random_tensor({1, 5}, rng);
  nn::AttentionCache cache;
  const Tensor y = nn::multi_head_self_attention(x, w, &cache);
  EXPECT_DOUBLE_EQ(cache.probs.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(cache.probs.at(1, 0, 0), 1.0);
  const Tensor v = nn::affine(x, w.wv, w.bv);
  const Tensor ref = nn::affine(v, w.wo, w.bo);
  EXPECT_LT(oracle::max_abs_diff(y, ref), 1e-12);
}

TEST(Attention, PermutationEquivariant) {
  Rng rng(13);
  const auto w = layer_checks::random_attention(rng, 6, 8, 4, 2);
  const Tensor x = oracle::random_tensor({5, 6}, rng);
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  Tensor xp({5, 6});
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) xp.at(i, j) = x.at(perm[i], j);
  const Tensor y = nn::multi_head_self_attention(x, w), yp = nn::multi_head_self_attention(xp, w);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(yp.at(i, j), y.at(perm[i], j), 1e-12);
}

TEST(Attention, HeadsMustDivideUnits) {
  Rng rng(14);
  auto w = layer_checks::random_attention(rng, 4, 6, 2, 4);
  EXPECT_THROW(nn::multi_head_self_attention(oracle::random_tensor({3, 4}, rng), w), ShapeError);
  w.heads = 2;
  EXPECT_THROW(nn::multi_head_self_attention(oracle::random_tensor({3, 5}, rng), w), ShapeError);
}

TEST(StatPool, Examples) {
  Tensor c({4, 3});
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 3; ++j) c.at(t, j) = static_cast<double>(j) - 1.5;
  const Tensor p = nn::global_stat_pool(c);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(p[j], static_cast<double>(j) - 1.5);
    EXPECT_DOUBLE_EQ(p[3 + j], 0.0);
  }
  const Tensor two({2, 2}, std::vector<double>{0.0, 0.0, 2.0, 2.0});
  const Tensor q = nn::global_stat_pool(two);
  EXPECT_EQ(q.vector(), (std::vector<double>{1.0, 1.0, 1.0, 1.0}));
  EXPECT_THROW(nn::global_stat_pool(Tensor({0, 3})), EmptyInputError);
}

TEST(StatPool, FrameRepetitionKeepsStatistics) {
  Rng rng(15);
  const Tensor x = oracle::random_tensor({9, 4}, rng);
  Tensor x2({18, 4});
  for (std::size_t t = 0; t < 18; ++t)
    for (std::size_t j = 0; j < 4; ++j) x2.at(t, j) = x.at(t / 2, j);
  EXPECT_LT(oracle::max_abs_diff(nn::global_stat_pool(x), nn::global_stat_pool(x2)), 1e-5);
}

TEST(StatPool, RandomMatchesOracle) {
  Rng rng(16);
  for (int i = 0; i < 50; ++i) EXPECT_LT(layer_checks::stat_pool_trial(rng), 1e-6);
}

TEST(AvgPool, Examples) {
  Rng rng(17);
  const Tensor x = oracle::random_tensor({3, 5, 1}, rng);
  const Tensor y = nn::global_avg_pool_freq(x);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ(y.at(t, c), x.at(c, t, 0));
  Tensor k({2, 4, 6});
  for (std::size_t i = 0; i < 24; ++i) k[i] = 0.5, k[24 + i] = -3.0;
  const Tensor z = nn::global_avg_pool_freq(k);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_DOUBLE_EQ(z.at(t, 0), 0.5);
    EXPECT_DOUBLE_EQ(z.at(t, 1), -3.0);
  }
  for (int i = 0; i < 50; ++i) EXPECT_LT(layer_checks::avg_pool_trial(rng), 1e-7);
}

TEST(Activations, Examples) {
  EXPECT_DOUBLE_EQ(nn::sigmoid(0.0), 0.5);
  const Tensor r = nn::relu(Tensor({2}, std::vector<double>{-1.0, 2.0}));
  EXPECT_EQ(r.vector(), (std::vector<double>{0.0, 2.0}));
  Rng rng(18);
  const Tensor x = oracle::random_tensor({3, 4}, rng);
  Tensor eye({4, 4});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  EXPECT_EQ(nn::affine(x, eye, Tensor({4})), x);
  EXPECT_THROW(nn::affine(x, Tensor({2, 3}), Tensor({2})), ShapeError);
  // Large magnitudes stay finite and inside [0, 1].
  EXPECT_EQ(nn::sigmoid(-1000.0), 0.0);
  EXPECT_EQ(nn::sigmoid(1000.0), 1.0);
}

TEST(Matmul, VariantsAgree) {
  Rng rng(19);
  const Tensor a = oracle::random_tensor({3, 4}, rng), b = oracle::random_tensor({4, 5}, rng);
  const Tensor ab = nn::matmul(a, b);
  EXPECT_LT(oracle::max_abs_diff(nn::matmul_nt(a, nn::transpose(b)), ab), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(nn::matmul_tn(nn::transpose(a), b), ab), 1e-12);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(ab.at(i, j), s, 1e-12);
    }
}

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
  const Tensor t({2, 3}, 1.0);
  EXPECT_EQ(t.reshaped({3, 2}).dims(), (std::vector<std::size_t>{3, 2}));
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
  Tensor n({2});
  n[1] = std::nan("");
  EXPECT_FALSE(n.all_finite());
  EXPECT_TRUE(t.all_finite());
}

TEST(Weights, EmptyStoreRoundTrips) {
  const WeightStore w;
  EXPECT_EQ(deserialize_weights(serialize_weights(w)), w);
}

TEST(Weights, TwoByTwoRoundTripsBitExactly) {
  WeightStore w;
  // Binary32-representable values survive exactly.
  w.set("a.kernel", Tensor({2, 2}, std::vector<double>{0.5, -1.25, 3.0, static_cast<double>(0.1f)}));
  const auto path = std::filesystem::path(::testing::TempDir()) / "layers_w.nnw";
  save_weights(w, path);
  const WeightStore r = load_weights(path);
  EXPECT_EQ(r, w);
  const Tensor& t = r.get("a.kernel", {2, 2});
  EXPECT_EQ(std::memcmp(t.data(), w.get("a.kernel").data(), 4 * sizeof(double)), 0);
}

TEST(Weights, CorruptionIsFormatError) {
  WeightStore w;
  w.set("x", Tensor({3}, 1.0));
  auto bytes = serialize_weights(w);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_weights(bad), FormatError);
  auto cut = bytes;
  cut.resize(cut.size() - 2);
  EXPECT_THROW(deserialize_weights(cut), FormatError);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_THROW(deserialize_weights(extra), FormatError);
}

TEST(Weights, StoreHelpers) {
  Rng rng(20);
  WeightStore w;
  w.set("m.a", oracle::random_tensor({2, 3}, rng));
  w.set("m.b", oracle::random_tensor({4}, rng));
  w.set("other", oracle::random_tensor({1}, rng));
  EXPECT_EQ(w.parameter_count(), 11u);
  EXPECT_THROW(w.get("missing"), InputError);
  EXPECT_THROW(w.get("m.a", {3, 2}), ShapeError);
  const WeightStore sub = w.subtree("m");
  EXPECT_EQ(sub.names(), (std::vector<std::string>{"a", "b"}));
  WeightStore merged;
  merged.merge(sub, "n");
  EXPECT_TRUE(merged.contains("n.a"));
  EXPECT_EQ(w.copy_prefix("m", "k"), 2u);
  EXPECT_EQ(w.get("k.b"), w.get("m.b"));
  auto flat = w.flatten();
  for (auto& v : flat) v *= 2.0;
  const double before = w.get("m.b")[0];
  w.assign_flat(flat);
  EXPECT_DOUBLE_EQ(w.get("m.b")[0], 2.0 * before);
  EXPECT_THROW(w.assign_flat(std::vector<double>(3)), ShapeError);
}

}  // namespace
}  // namespace diarkit
