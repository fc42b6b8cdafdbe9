#include <gtest/gtest.h>

#include <array>
#include <random>

#include "oracle.hpp"
#include "stisnn/cost_model.hpp"
#include "stisnn/dataflow.hpp"

using namespace stisnn;

namespace {

LayerSpec conv(LayerMode mode, std::size_t ci, std::size_t co, std::size_t k, std::size_t pad,
               std::int32_t th) {
  LayerSpec s;
  s.mode = mode;
  s.in_channels = ci;
  s.out_channels = co;
  s.kernel_h = s.kernel_w = k;
  s.padding = pad;
  s.threshold = th;
  return s;
}

}  // namespace

TEST(ConvStandard, SingleWeightFires) {
  const auto s = conv(LayerMode::Standard, 1, 1, 1, 0, 4);
  QuantizedWeights w{{5}, {0}};
  SpikeFrame in(1, 1, 1);
  in.set(0, 0, 0);
  auto state = MembraneState::allocate(1, 18);
  const auto out = conv_standard(in, s, w, state);
  EXPECT_TRUE(out.frame.test(0, 0, 0));
  EXPECT_EQ(out.state.potentials[0], 0);
}

TEST(ConvStandard, ZeroInputOnlyLeaks) {
  auto s = conv(LayerMode::Standard, 2, 3, 3, 1, 100);
  s.leak = 128;
  std::mt19937 rng(5);
  const auto w = oracle::random_weights(rng, s);
  MembraneState state = MembraneState::allocate(4 * 4 * 3, 18);
  for (std::size_t i = 0; i < state.potentials.size(); ++i) state.potentials[i] = static_cast<int>(i) - 20;
  const auto before = state.potentials;
  const auto out = conv_standard(SpikeFrame(4, 4, 2), s, w, state);
  EXPECT_EQ(out.frame.spike_count(), 0u);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(out.state.potentials[i], before[i] * 128 / 256);
}

TEST(ConvStandard, MatchesDenseOracle6x6) {
  std::mt19937 rng(6);
  const auto s = conv(LayerMode::Standard, 3, 4, 3, 1, 64);
  for (int trial = 0; trial < 20; ++trial) {
    const SpikeFrame in = oracle::random_frame(rng, 6, 6, 3, 0.5);
    const auto w = oracle::random_weights(rng, s);
    const auto out = conv_standard(in, s, w, MembraneState::stateless());
    EXPECT_EQ(out.frame, oracle::from_dense(oracle::conv_fire(oracle::to_dense(in), s, w)));
  }
}

TEST(ConvStandard, MissingStateIsShapeError) {
  const auto s = conv(LayerMode::Standard, 1, 1, 1, 0, 4);
  try {
    conv_standard(SpikeFrame(2, 2, 1), s, QuantizedWeights::zeros(s), MembraneState::allocate(3, 18));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
  EXPECT_THROW(conv_standard(SpikeFrame(2, 2, 2), s, QuantizedWeights::zeros(s), {}), Error);
}

TEST(ConvDepthwise, CenterThresholdIsIdentity) {
  std::mt19937 rng(8);
  const auto s = conv(LayerMode::Depthwise, 5, 5, 3, 1, 7);
  QuantizedWeights w = QuantizedWeights::zeros(s);
  for (std::size_t c = 0; c < 5; ++c) w.values[depthwise_index(s, c, 1, 1)] = 7;
  const SpikeFrame in = oracle::random_frame(rng, 6, 5, 5);
  EXPECT_EQ(conv_depthwise(in, s, w, {}).frame, in);
  EXPECT_EQ(conv_depthwise(SpikeFrame(6, 5, 5), s, w, {}).frame, SpikeFrame(6, 5, 5));
}

TEST(ConvDepthwise, EqualsStandardWithDiagonalKernel) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 1 + rng() % 6, k = 1 + 2 * (rng() % 2);
    const auto dw = conv(LayerMode::Depthwise, c, c, k, k / 2, 1 + static_cast<int>(rng() % 100));
    auto std_spec = dw;
    std_spec.mode = LayerMode::Standard;
    const auto wd = oracle::random_weights(rng, dw, 20);
    QuantizedWeights ws = QuantizedWeights::zeros(std_spec);
    ws.bias = wd.bias;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
          ws.values[standard_index(std_spec, ch, ch, a, b)] = wd.values[depthwise_index(dw, ch, a, b)];
    const SpikeFrame in = oracle::random_frame(rng, 1 + rng() % 7, 1 + rng() % 7, c);
    if (in.height() + 2 * dw.padding < k || in.width() + 2 * dw.padding < k) continue;
    EXPECT_EQ(conv_depthwise(in, dw, wd, {}).frame, conv_standard(in, std_spec, ws, {}).frame);
  }
}

TEST(ConvDepthwise, ChannelMismatchIsInvariantViolation) {
  auto s = conv(LayerMode::Depthwise, 2, 3, 3, 1, 1);
  try {
    conv_depthwise(SpikeFrame(3, 3, 2), s, QuantizedWeights{}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvariantViolation);
  }
}

TEST(ConvPointwise, HandSum) {
  const auto s = conv(LayerMode::Pointwise, 2, 1, 1, 0, 5);
  QuantizedWeights w{{3, 2}, {0}};
  SpikeFrame in(1, 1, 2);
  in.set(0, 0, 0);
  in.set(0, 0, 1);
  EXPECT_TRUE(conv_pointwise(in, s, w, {}).frame.test(0, 0, 0));
  in.set(0, 0, 1, false);
  EXPECT_FALSE(conv_pointwise(in, s, w, {}).frame.test(0, 0, 0));
}

TEST(ConvPointwise, EqualsStandardK1) {
  std::mt19937 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t ci = 1 + rng() % 8, co = 1 + rng() % 8;
    const auto pw = conv(LayerMode::Pointwise, ci, co, 1, 0, 1 + static_cast<int>(rng() % 200));
    auto sd = pw;
    sd.mode = LayerMode::Standard;
    const auto w = oracle::random_weights(rng, pw, 50);
    const SpikeFrame in = oracle::random_frame(rng, 1 + rng() % 8, 1 + rng() % 8, ci);
    EXPECT_EQ(conv_pointwise(in, pw, w, {}).frame, conv_standard(in, sd, w, {}).frame);
  }
}

TEST(ConvPointwise, ZeroWeightsNeverFire) {
  std::mt19937 rng(12);
  const auto s = conv(LayerMode::Pointwise, 4, 4, 1, 0, 1);
  const SpikeFrame in = oracle::random_frame(rng, 5, 5, 4, 0.9);
  EXPECT_EQ(conv_pointwise(in, s, QuantizedWeights::zeros(s), {}).frame.spike_count(), 0u);
}

TEST(ConvPointwise, NonUnitKernelIsInvariantViolation) {
  const auto s = conv(LayerMode::Pointwise, 2, 2, 3, 1, 1);
  EXPECT_THROW(conv_pointwise(SpikeFrame(3, 3, 2), s, QuantizedWeights{}, {}), Error);
}

TEST(PoolOr, Examples) {
  SpikeFrame f(2, 2, 1);
  f.set(1, 0, 0);
  EXPECT_TRUE(pool_or(f).test(0, 0, 0));
  EXPECT_EQ(pool_or(SpikeFrame(4, 6, 3)), SpikeFrame(2, 3, 3));
  EXPECT_THROW(pool_or(SpikeFrame(3, 4, 1)), Error);
}

TEST(PoolOr, MatchesMaxPool) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const SpikeFrame f = oracle::random_frame(rng, 8, 8, 4, 0.15);
    EXPECT_EQ(pool_or(f), oracle::from_dense(oracle::max_pool(oracle::to_dense(f), 2)));
  }
}

TEST(PoolOr, IdempotentOnConstantFramesAndCommutesWithChannelSlicing) {
  SpikeFrame ones(4, 4, 2);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) ones.at(y, x).set(0), ones.at(y, x).set(1);
  // A constant frame pools to the same constant at half resolution.
  const SpikeFrame p = pool_or(ones);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < 2; ++x) EXPECT_EQ(p.at(y, x).count(), 2u);
  EXPECT_EQ(pool_or(p).spike_count(), 2u);
  EXPECT_EQ(pool_or(SpikeFrame(4, 4, 2)), SpikeFrame(2, 2, 2));

  std::mt19937 rng(14);
  const SpikeFrame f = oracle::random_frame(rng, 6, 6, 3);
  const SpikeFrame pooled = pool_or(f);
  for (std::size_t c = 0; c < 3; ++c) {
    SpikeFrame slice(6, 6, 1);
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t x = 0; x < 6; ++x) slice.set(y, x, 0, f.test(y, x, c));
    const SpikeFrame ps = pool_or(slice);
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x) EXPECT_EQ(ps.test(y, x, 0), pooled.test(y, x, c));
  }
}

TEST(FullyConnected, SelectorAndBias) {
  LayerSpec s;
  s.mode = LayerMode::FullyConnected;
  s.in_channels = 2 * 2 * 3;
  s.out_channels = 4;
  std::mt19937 rng(15);
  const auto w = oracle::random_weights(rng, s, 100);
  EXPECT_EQ(fully_connected(SpikeFrame(2, 2, 3), s, w),
            std::vector<std::int32_t>(w.bias.begin(), w.bias.end()));
  SpikeFrame one(2, 2, 3);
  one.set(1, 0, 2);  // flattened index (1*2+0)*3+2 = 8
  const auto p = fully_connected(one, s, w);
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(p[c], w.values[c * 12 + 8] + w.bias[c]);
}

TEST(FullyConnected, MatchesDenseMatvec) {
  std::mt19937 rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = 1 + rng() % 5, wd = 1 + rng() % 5, c = 1 + rng() % 5;
    LayerSpec s;
    s.mode = LayerMode::FullyConnected;
    s.in_channels = h * wd * c;
    s.out_channels = 1 + rng() % 10;
    const auto w = oracle::random_weights(rng, s, 1000);
    const SpikeFrame in = oracle::random_frame(rng, h, wd, c);
    const auto got = fully_connected(in, s, w);
    const auto want = oracle::matvec(oracle::to_dense(in), s, w);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], want[i]);
  }
}

TEST(FullyConnected, ExtentMismatch) {
  LayerSpec s;
  s.mode = LayerMode::FullyConnected;
  s.in_channels = 5;
  s.out_channels = 2;
  EXPECT_THROW(fully_connected(SpikeFrame(2, 2, 1), s, QuantizedWeights::zeros(s)), Error);
}

// Instrumented counts equal the closed forms: line-buffered fetches and
// slice broadcasts off chip, one read per operand use at the PEs.
TEST(AccessTally, MatchesClosedForms) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const LayerMode mode = std::array{LayerMode::Standard, LayerMode::Depthwise,
                                      LayerMode::Pointwise}[rng() % 3];
    const std::size_t ci = 1 + rng() % 6;
    const std::size_t co = mode == LayerMode::Depthwise ? ci : 1 + rng() % 6;
    const std::size_t k = mode == LayerMode::Pointwise ? 1 : 1 + 2 * (rng() % 2);
    const auto s = conv(mode, ci, co, k, k / 2, 50);
    const std::size_t h = 1 + rng() % 6, w = 1 + rng() % 6;
    if (h + 2 * s.padding < k || w + 2 * s.padding < k) continue;
    const std::size_t T = 1 + rng() % 3;
    const auto weights = oracle::random_weights(rng, s);
    const auto geom = geometry_of(s, {h, w, ci});

    MembraneState state = T > 1 ? MembraneState::allocate(geom.out_h * geom.out_w * co, 18)
                                : MembraneState::stateless();
    AccessTally total;
    for (std::size_t t = 0; t < T; ++t) {
      auto out = conv_layer(oracle::random_frame(rng, h, w, ci), s, weights, std::move(state));
      state = std::move(out.state);
      total += out.tally;
    }
    const AccessCounts mode_counts = access_counts_mode(mode, geom, T);
    EXPECT_EQ(total.input_reads, mode_counts.input_reads);
    EXPECT_EQ(total.weight_broadcasts, mode_counts.weight_reads);
    EXPECT_EQ(total.psum_accesses, mode_counts.psum_accesses);
    if (mode != LayerMode::Depthwise) {
      const AccessCounts os = access_counts_os(geom, T);
      EXPECT_EQ(total.pe_input_reads, os.input_reads);
      EXPECT_EQ(total.weight_reads, os.weight_reads);
    } else {
      EXPECT_EQ(total.weight_reads, co * k * k * geom.out_h * geom.out_w * T);
    }
  }
}
