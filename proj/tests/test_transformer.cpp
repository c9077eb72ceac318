#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck_oracle.hpp"
#include "ltpnet/errors.hpp"
#include "ltpnet/transformer.hpp"

using namespace ltpnet;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, SeededRng& rng, double scale = 1.0) {
  Tensor t({r, c});
  for (double& v : t.data()) v = rng.uniform(-scale, scale);
  return t;
}

Tensor permute_rows(const Tensor& x, const std::vector<std::size_t>& perm) {
  Tensor out(x.shape());
  for (std::size_t r = 0; r < perm.size(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(perm[r], c);
  return out;
}

void jitter(EncoderLayerParams& p, SeededRng& rng) {
  for (Tensor* t : p.tensors())
    if (t->rank() == 1)
      for (double& v : t->data()) v += rng.uniform(-0.3, 0.3);
}

}  // namespace

TEST(PositionalEncoding, OriginAndFirstStep) {
  const Tensor pe = positional_encoding(5, 8);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(pe(0, j), j % 2 == 0 ? 0.0 : 1.0);
  EXPECT_NEAR(pe(1, 0), 0.841471, 1e-6);
  EXPECT_DOUBLE_EQ(pe(1, 0), std::sin(1.0));
  EXPECT_DOUBLE_EQ(pe(3, 5), std::cos(3.0 / std::pow(10000.0, 4.0 / 8.0)));
  for (double v : pe.data()) EXPECT_LE(std::abs(v), 1.0);
}

TEST(PositionalEncoding, RejectsOddWidth) { EXPECT_THROW(positional_encoding(3, 5), ShapeError); }

TEST(Attention, SinglePositionReturnsValueRow) {
  const Tensor v = Tensor::matrix({{3.5, -2.0}});
  const auto r = scaled_attention(Tensor::matrix({{1, 2}}), Tensor::matrix({{-4, 0.5}}), v);
  EXPECT_EQ(r.output, v);
  EXPECT_EQ(r.weights(0, 0), 1.0);
}

TEST(Attention, ZeroScoresAverageValues) {
  const Tensor v = Tensor::matrix({{1, 10}, {3, 20}, {8, 60}});
  const auto r = scaled_attention(Tensor({3, 2}), Tensor::matrix({{1, 2}, {3, 4}, {5, 6}}), v);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(r.output(i, 0), 4.0, 1e-12);
    EXPECT_NEAR(r.output(i, 1), 30.0, 1e-12);
  }
}

TEST(Attention, HandSoftmaxExample) {
  const Tensor qk = Tensor::matrix({{1}, {0}});
  const auto r = scaled_attention(qk, qk, Tensor::matrix({{10}, {20}}));
  const double w0 = std::exp(1.0) / (std::exp(1.0) + 1.0);
  EXPECT_NEAR(r.weights(0, 0), w0, 1e-15);
  EXPECT_NEAR(r.weights(0, 0), 0.7311, 1e-4);
  EXPECT_NEAR(r.output(0, 0), 10.0 * w0 + 20.0 * (1.0 - w0), 1e-12);
  EXPECT_NEAR(r.output(0, 0), 12.689, 1e-3);
}

TEST(Attention, WeightRowsSumToOne) {
  SeededRng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t seq = 1 + rng.below(8), d = 1 + rng.below(6);
    const auto r = scaled_attention(random_matrix(seq, d, rng, 20.0), random_matrix(seq, d, rng, 20.0),
                                    random_matrix(seq, d, rng));
    for (std::size_t i = 0; i < seq; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < seq; ++j) s += r.weights(i, j);
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Attention, RejectsShapeMismatch) {
  EXPECT_THROW(scaled_attention(Tensor({2, 3}), Tensor({2, 2}), Tensor({2, 2})), ShapeError);
  EXPECT_THROW(scaled_attention(Tensor({2, 2}), Tensor({3, 2}), Tensor({2, 2})), ShapeError);
}

TEST(MultiHead, ZeroProjectionsGiveZeros) {
  const auto p = EncoderLayerParams::zeros(4, 2, 8);
  SeededRng rng(1);
  const Tensor y = multi_head_attention(random_matrix(3, 4, rng), p);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(MultiHead, IdentityProjectionsReduceToSelfAttention) {
  auto p = EncoderLayerParams::zeros(3, 1, 4);
  for (Tensor* w : {&p.w_q, &p.w_k, &p.w_v, &p.w_o})
    for (std::size_t i = 0; i < 3; ++i) (*w)(i, i) = 1.0;
  SeededRng rng(2);
  const Tensor x = random_matrix(4, 3, rng);
  const Tensor a = multi_head_attention(x, p);
  const Tensor b = scaled_attention(x, x, x).output;
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(MultiHead, PermutationEquivariant) {
  SeededRng rng(3);
  const auto p = EncoderLayerParams::random(8, 2, 16, rng);
  const Tensor x = random_matrix(4, 8, rng);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const Tensor a = permute_rows(multi_head_attention(x, p), perm);
  const Tensor b = multi_head_attention(permute_rows(x, perm), p);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
}

TEST(FeedForward, Examples) {
  SeededRng rng(4);
  const Tensor x = random_matrix(2, 3, rng);
  const Tensor z = feed_forward(x, Tensor({3, 5}), Tensor({5}), Tensor({5, 3}), Tensor({3}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);

  const Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor pos = Tensor::matrix({{0.5, 2.0}, {3.0, 0.0}});
  EXPECT_EQ(feed_forward(pos, id, Tensor({2}), id, Tensor({2})), pos);

  const Tensor y = feed_forward(Tensor::matrix({{-1}}), Tensor::matrix({{1}}), Tensor::vector({0}),
                                Tensor::matrix({{5}}), Tensor::vector({1}));
  EXPECT_EQ(y(0, 0), 1.0);
}

TEST(EncoderLayer, ZeroSublayersNormTwice) {
  SeededRng rng(5);
  const auto p = EncoderLayerParams::zeros(4, 2, 8);
  const Tensor x = random_matrix(3, 4, rng);
  const Tensor one({4}, 1.0), zero({4}, 0.0);
  const Tensor expected = layer_norm(layer_norm(x, one, zero), one, zero);
  const Tensor y = encoder_layer_forward(x, p).output;
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expected[i], 1e-12);
}

TEST(EncoderLayer, ShapePreservedAndFinalGainLinear) {
  SeededRng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t heads = 1 + rng.below(3), d = heads * 2, seq = 1 + rng.below(6);
    auto p = EncoderLayerParams::random(d, heads, 2 * d, rng);
    const Tensor x = random_matrix(seq, d, rng);
    const Tensor y = encoder_layer_forward(x, p).output;
    EXPECT_EQ(y.shape(), x.shape());
    auto doubled = p;
    for (double& g : doubled.ln2_gain.data()) g *= 2.0;
    const Tensor y2 = encoder_layer_forward(x, doubled).output;
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y2[i], 2.0 * y[i]);
  }
}

TEST(EncoderLayer, RejectsHeadsNotDividingWidth) {
  EXPECT_THROW(EncoderLayerParams::zeros(6, 4, 8), ShapeError);
}

TEST(EncoderStack, NoLayersGivesProjectionPlusPositions) {
  SeededRng rng(7);
  const auto stack = EncoderStack::random(3, 4, 0, 2, 8, 10, rng);
  const Tensor h = random_matrix(5, 3, rng);
  const Tensor y = encoder_stack_forward(h, stack).output;
  const Tensor pe = positional_encoding(5, 4);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      double s = stack.b_in[c] + pe(r, c);
      for (std::size_t k = 0; k < 3; ++k) s += h(r, k) * stack.w_in(k, c);
      EXPECT_NEAR(y(r, c), s, 1e-14);
    }
}

TEST(EncoderStack, FiniteOnPaperSizedInput) {
  SeededRng rng(8);
  const auto stack = EncoderStack::random(128, 256, 6, 8, 1024, 24, rng);
  const Tensor y = encoder_stack_forward(random_matrix(24, 128, rng), stack).output;
  EXPECT_EQ(y.shape(), (std::vector<std::size_t>{24, 256}));
  EXPECT_TRUE(y.all_finite());
}

TEST(EncoderStack, PositionsBreakPermutationEquivariance) {
  SeededRng rng(9);
  auto stack = EncoderStack::random(3, 8, 2, 2, 16, 8, rng);
  const Tensor h = random_matrix(4, 3, rng);
  const std::vector<std::size_t> perm{3, 1, 0, 2};
  auto max_gap = [&] {
    const Tensor a = permute_rows(encoder_stack_forward(h, stack).output, perm);
    const Tensor b = encoder_stack_forward(permute_rows(h, perm), stack).output;
    double gap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a[i] - b[i]));
    return gap;
  };
  EXPECT_GT(max_gap(), 1e-3);
  stack.use_positional = false;
  EXPECT_LT(max_gap(), 1e-10);
}

TEST(EncoderStack, RejectsTooLongSequence) {
  SeededRng rng(10);
  const auto stack = EncoderStack::random(2, 4, 1, 2, 8, 3, rng);
  EXPECT_THROW(encoder_stack_forward(Tensor({4, 2}), stack), ShapeError);
  EXPECT_THROW(encoder_stack_forward(Tensor({2, 3}), stack), ShapeError);
}

TEST(Head, BiasOnlyAndConstantRows) {
  auto head = PredictionHead::zeros(2, 3);
  SeededRng rng(11);
  EXPECT_EQ(predict(random_matrix(4, 2, rng), head), 0.0);
  head.b_b[0] = 5.0;
  EXPECT_EQ(predict(random_matrix(4, 2, rng), head), 5.0);

  head = PredictionHead::random(2, 3, rng);
  const Tensor rows = Tensor::matrix({{0.4, -0.7}, {0.4, -0.7}, {0.4, -0.7}});
  double expected = head.b_b[0];
  for (std::size_t j = 0; j < 3; ++j) {
    const double a = std::max(0.0, 0.4 * head.w_a(0, j) - 0.7 * head.w_a(1, j) + head.b_a[j]);
    expected += a * head.w_b(j, 0);
  }
  EXPECT_NEAR(predict(rows, head), expected, 1e-14);
}

TEST(TransformerBackward, ZeroUpstreamAndPositionalUntouched) {
  SeededRng rng(13);
  const auto stack = EncoderStack::random(3, 4, 1, 2, 8, 6, rng);
  const auto head = PredictionHead::random(4, 3, rng);
  const Tensor h = random_matrix(3, 3, rng);
  TransformerCache cache;
  auto enc = encoder_stack_forward(h, stack);
  cache.encoder = enc.cache;
  predict(enc.output, head, &cache.head);
  const auto zero = transformer_backward(cache, stack, head, 0.0);
  for (double v : zero.input.data()) EXPECT_EQ(v, 0.0);
  for (double v : zero.encoder.w_in.data()) EXPECT_EQ(v, 0.0);
  const auto g = transformer_backward(cache, stack, head, 1.0);
  for (double v : g.encoder.positional.data()) EXPECT_EQ(v, 0.0);
}

TEST(TransformerBackward, TinyConfigurationMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SeededRng rng(200 + seed);
    auto stack = EncoderStack::random(3, 4, 1, 2, 8, 3, rng);
    for (auto& layer : stack.layers) jitter(layer, rng);
    for (double& v : stack.b_in.data()) v = rng.uniform(-0.3, 0.3);
    auto head = PredictionHead::random(4, 5, rng);
    for (double& v : head.b_a.data()) v = rng.uniform(0.0, 0.3);
    Tensor h = random_matrix(3, 3, rng);

    const auto loss = [&] { return predict(encoder_stack_forward(h, stack).output, head); };
    TransformerCache cache;
    auto enc = encoder_stack_forward(h, stack);
    cache.encoder = enc.cache;
    predict(enc.output, head, &cache.head);
    const auto g = transformer_backward(cache, stack, head, 1.0);

    EXPECT_LT(oracle::max_relative_error(g.input, oracle::numeric_gradient(h, loss)), 1e-4);
    EXPECT_LT(oracle::max_relative_error(g.encoder.w_in, oracle::numeric_gradient(stack.w_in, loss)), 1e-4);
    EXPECT_LT(oracle::max_relative_error(g.encoder.b_in, oracle::numeric_gradient(stack.b_in, loss)), 1e-4);
    const auto analytic = g.encoder.layers[0].tensors();
    const auto values = stack.layers[0].tensors();
    for (std::size_t k = 0; k < EncoderLayerParams::kTensorCount; ++k)
      EXPECT_LT(oracle::max_relative_error(*analytic[k], oracle::numeric_gradient(*values[k], loss)), 1e-4)
          << EncoderLayerParams::kTensorNames[k] << " seed " << seed;
    const auto ha = g.head.tensors();
    const auto hv = head.tensors();
    for (std::size_t k = 0; k < PredictionHead::kTensorCount; ++k)
      EXPECT_LT(oracle::max_relative_error(*ha[k], oracle::numeric_gradient(*hv[k], loss)), 1e-4)
          << PredictionHead::kTensorNames[k];
  }
}

TEST(LayerNormBackward, MatchesFiniteDifferences) {
  SeededRng rng(14);
  Tensor x = random_matrix(3, 5, rng);
  Tensor gain = random_matrix(1, 5, rng), bias = random_matrix(1, 5, rng);
  gain = Tensor({5}, std::vector<double>(gain.data().begin(), gain.data().end()));
  bias = Tensor({5}, std::vector<double>(bias.data().begin(), bias.data().end()));
  const Tensor r = random_matrix(3, 5, rng);
  const auto loss = [&] {
    const Tensor y = layer_norm(x, gain, bias);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  LayerNormCache cache;
  layer_norm_cached(x, gain, bias, cache);
  Tensor gg({5}), gb({5});
  const Tensor dx = layer_norm_backward(cache, gain, r, gg, gb);
  EXPECT_LT(oracle::max_relative_error(dx, oracle::numeric_gradient(x, loss)), 1e-6);
  EXPECT_LT(oracle::max_relative_error(gg, oracle::numeric_gradient(gain, loss)), 1e-6);
  EXPECT_LT(oracle::max_relative_error(gb, oracle::numeric_gradient(bias, loss)), 1e-6);
}

TEST(TransformerParams, FeedForwardBlockCount) {
  const auto p = EncoderLayerParams::zeros(4, 2, 8);
  EXPECT_EQ(p.w_1.size() + p.b_1.size() + p.w_2.size() + p.b_2.size(), 76u);
}
