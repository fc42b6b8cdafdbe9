#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <random>

#include "stisnn/config.hpp"
#include "stisnn/io.hpp"
#include "stisnn/weight_file.hpp"

using namespace stisnn;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;  // sentinel: no error raised
}

}  // namespace

TEST(ParseArchitecture, Scnn3Tail) {
  const auto c = parse_architecture("28x28x16 32c3-p2-32c3-p2-fc10");
  EXPECT_FALSE(c.encoder);
  ASSERT_EQ(c.layers.size(), 5u);
  const auto dims = layer_shapes(c);
  EXPECT_EQ(dims[0], (Dims{28, 28, 32}));
  EXPECT_EQ(dims[1], (Dims{14, 14, 32}));
  EXPECT_EQ(dims[2], (Dims{14, 14, 32}));
  EXPECT_EQ(dims[3], (Dims{7, 7, 32}));
  EXPECT_EQ(dims[4], (Dims{1, 1, 10}));
  EXPECT_EQ(c.layers[4].in_channels, 7u * 7 * 32);
  EXPECT_EQ(c.layers[0].padding, 1u);
}

TEST(ParseArchitecture, PoolMustDivide) {
  EXPECT_EQ(kind_of([] { parse_architecture("7x7x2 p2"); }), ErrorKind::Shape);
  EXPECT_EQ(kind_of([] { parse_architecture("9x9x2 4c3-p3"); }), ErrorKind::Io);
  EXPECT_EQ(kind_of([] { parse_architecture("10x10x2 4c3-p3"); }), ErrorKind::Shape);
}

TEST(ParseArchitecture, DepthwiseSeparablePair) {
  const auto c = parse_architecture("8x8x16 16dwc3/32c1");
  ASSERT_EQ(c.layers.size(), 2u);
  EXPECT_EQ(c.layers[0].mode, LayerMode::Depthwise);
  EXPECT_EQ(c.layers[0].in_channels, 16u);
  EXPECT_EQ(c.layers[0].out_channels, 16u);
  EXPECT_EQ(c.layers[1].mode, LayerMode::Pointwise);
  EXPECT_EQ(c.layers[1].in_channels, 16u);
  EXPECT_EQ(c.layers[1].out_channels, 32u);
  EXPECT_EQ(c.layers[1].padding, 0u);
}

TEST(ParseArchitecture, PublishedModels) {
  const auto scnn3 = parse_architecture("28x28 16c3-32c3-p2-32c3-p2-fc");
  ASSERT_TRUE(scnn3.encoder);
  EXPECT_EQ(scnn3.encoder->out_channels, 16u);
  EXPECT_EQ(scnn3.layers.back().out_channels, 10u);

  const auto vmob = parse_architecture(
      "28x28 16c3-16dwc3/32c1-32dwc3/64c1-64dwc3/64c1-64dwc3/128c1-fc");
  ASSERT_EQ(vmob.layers.size(), 9u);
  EXPECT_EQ(vmob.layers[6].mode, LayerMode::Depthwise);
  EXPECT_EQ(vmob.layers[7].out_channels, 128u);
  EXPECT_EQ(layer_shapes(vmob).back(), (Dims{1, 1, 10}));

  const auto scnn5 = parse_architecture("32x32 64c3-p2-128c3-p2-256c3-p2-256c3-p2-512c3-p2-fc");
  const auto dims = layer_shapes(scnn5);
  EXPECT_EQ(dims[dims.size() - 2], (Dims{1, 1, 512}));
  EXPECT_EQ(accelerator_input(scnn5), (Dims{32, 32, 64}));
}

TEST(ParseArchitecture, Rejections) {
  EXPECT_EQ(kind_of([] { parse_architecture("28x28x16"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_architecture("28y28 16c3"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_architecture("8x8x4 8dwc3"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_architecture("8x8x4 4q3"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_architecture("8x8x4 fc-4c3"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_architecture("28x28 p2-4c3"); }), ErrorKind::Config);
}

TEST(ParseConfig, JsonLayersAndOverrides) {
  const auto c = parse_config(R"({
    "name": "tiny",
    "input": [8, 8, 1],
    "encoder": {"type": "conv", "out": 4, "kernel": 3},
    "layers": [
      {"type": "dwconv", "kernel": 3, "threshold": 9},
      {"type": "pwconv", "out": 6},
      {"type": "pool", "window": 2},
      {"type": "fc", "out": 3}
    ],
    "timesteps": 2,
    "leak": 0.5,
    "parallel_factors": [2, 3],
    "latency": {"weight_read": 1, "psum_reduce": 2}
  })");
  EXPECT_EQ(c.name, "tiny");
  ASSERT_TRUE(c.encoder);
  EXPECT_EQ(c.encoder->out_channels, 4u);
  ASSERT_EQ(c.layers.size(), 4u);
  EXPECT_EQ(c.layers[0].threshold, 9);
  EXPECT_EQ(c.layers[1].threshold, 64);
  EXPECT_EQ(c.layers[1].leak, 128);
  EXPECT_EQ(c.layers[0].parallel_factor, 2u);
  EXPECT_EQ(c.layers[1].parallel_factor, 3u);
  EXPECT_EQ(c.layers[3].in_channels, 4u * 4 * 6);
  EXPECT_EQ(c.timesteps, 2u);
  EXPECT_EQ(c.latency.weight_read, 1u);
  EXPECT_EQ(c.latency.pe_accumulate, 1u);
  EXPECT_EQ(c.latency.psum_reduce, 2u);
}

TEST(ParseConfig, ArchitectureKeyAndCompactText) {
  const auto a = parse_config(R"({"architecture": "28x28x16 32c3-p2-32c3-p2-fc10", "threshold": 20})");
  EXPECT_EQ(a.layers[0].threshold, 20);
  const auto b = parse_config("  28x28x16 32c3-p2-32c3-p2-fc10\n");
  EXPECT_EQ(b.layers.size(), a.layers.size());
  EXPECT_EQ(kind_of([] { parse_config("{bad json"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config(R"({"input": [4, 4, 1]})"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] {
              parse_config(R"({"architecture": "8x8x1 4c3-4c3", "parallel_factors": [1]})");
            }),
            ErrorKind::Config);
  EXPECT_EQ(kind_of([] {
              parse_config(R"({"input": [4, 4, 1], "layers": [{"type": "conv", "out": 2}, {"type": "pool", "window": 3}]})");
            }),
            ErrorKind::Config);
}

TEST(Idx, ParseImagesAndLabels) {
  IdxTensor imgs{kIdxImagesMagic, {2, 3, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}};
  const auto bytes = serialize_idx(imgs);
  EXPECT_EQ(bytes[2], 0x08);
  EXPECT_EQ(bytes[3], 0x03);
  const auto parsed = parse_idx(bytes);
  EXPECT_EQ(parsed.dims, imgs.dims);
  const auto images = images_from_idx(parsed);
  ASSERT_EQ(images.size(), 2u);
  EXPECT_EQ(images[1].height, 3u);
  EXPECT_EQ(images[1].width, 2u);
  EXPECT_EQ(images[1].at(0, 0, 0), 7);

  IdxTensor labels{kIdxLabelsMagic, {3}, {4, 0, 9}};
  EXPECT_EQ(labels_from_idx(parse_idx(serialize_idx(labels))), (std::vector<std::uint8_t>{4, 0, 9}));
  EXPECT_EQ(kind_of([&] { labels_from_idx(parsed); }), ErrorKind::Format);
}

TEST(Idx, RejectsCorruptFiles) {
  auto bytes = serialize_idx({kIdxImagesMagic, {1, 2, 2}, {1, 2, 3, 4}});
  auto bad = bytes;
  bad[3] = 0x07;
  EXPECT_EQ(kind_of([&] { parse_idx(bad); }), ErrorKind::Format);
  bad = bytes;
  bad.pop_back();
  EXPECT_EQ(kind_of([&] { parse_idx(bad); }), ErrorKind::Format);
  bad.resize(9);
  EXPECT_EQ(kind_of([&] { parse_idx(bad); }), ErrorKind::Format);
  EXPECT_EQ(kind_of([] { load_idx("/nonexistent/file.idx"); }), ErrorKind::Io);
}

TEST(WeightFile, RoundTripRandomNetworks) {
  const char* models[] = {"28x28 16c3-32c3-p2-32c3-p2-fc",
                          "16x16x4 4dwc3/8c1-p2-8dwc3/12c1-fc5", "6x6x2 3c3-p3-4c1"};
  std::uint64_t seed = 1;
  for (const char* m : models) {
    const auto c = parse_architecture(m);
    auto w = random_weights(c, seed++);
    std::mt19937 rng(static_cast<unsigned>(seed));
    for (auto& q : w)
      for (auto& b : q.bias) b = static_cast<std::int32_t>(rng());
    const WeightFile file = save_weights(c, w);
    const auto bytes = serialize(file);
    EXPECT_EQ(parse_weight_file(bytes), file);
    const auto bound = bind_weights(c, parse_weight_file(bytes));
    EXPECT_EQ(bound.encoder.has_value(), c.encoder.has_value());
    EXPECT_EQ(bound.layers.size(), c.layers.size());
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
      EXPECT_EQ(bound.layers[i], w[i + (c.encoder ? 1 : 0)]);
    }
  }
}

TEST(WeightFile, RecordLayout) {
  const auto c = parse_architecture("2x2x1 1c1");
  QuantizedWeights w = QuantizedWeights::zeros(c.layers[0]);
  w.values[0] = -2;
  w.bias[0] = 258;
  const auto bytes = serialize(save_weights(c, {w}));
  const std::vector<std::uint8_t> want{'S', 'T', 'I', 'W', 1, 0, 1, 0,  // header
                                       0, 1, 0, 1, 0, 1, 1,             // mode, C_i, C_o, K
                                       64, 0, 0, 0, 0, 1,               // V_th, leak
                                       0xfe, 2, 1, 0, 0};               // weight, bias
  EXPECT_EQ(bytes, want);
}

TEST(WeightFile, BindOverridesNeuronParameters) {
  const auto c = parse_architecture("4x4x1 2c3-p2-fc3");
  auto file = save_weights(c, random_weights(c, 5));
  file.layers[0].threshold = 17;
  file.layers[0].leak = 200;
  const auto bound = bind_weights(c, file);
  EXPECT_EQ(bound.config.layers[0].threshold, 17);
  EXPECT_EQ(bound.config.layers[0].leak, 200);
  EXPECT_EQ(bound.config.layers[1].threshold, c.layers[1].threshold);
}

TEST(WeightFile, Rejections) {
  const auto c = parse_architecture("4x4x1 2c3-p2-fc3");
  const auto bytes = serialize(save_weights(c, random_weights(c, 6)));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(kind_of([&] { parse_weight_file(bad); }), ErrorKind::Format);
  bad = bytes;
  bad[4] = 9;
  EXPECT_EQ(kind_of([&] { parse_weight_file(bad); }), ErrorKind::Format);
  bad = bytes;
  bad.pop_back();
  EXPECT_EQ(kind_of([&] { parse_weight_file(bad); }), ErrorKind::Format);
  bad = bytes;
  bad.push_back(0);
  EXPECT_EQ(kind_of([&] { parse_weight_file(bad); }), ErrorKind::Format);

  const auto other = parse_architecture("4x4x1 3c3-p2-fc3");
  try {
    bind_weights(other, parse_weight_file(bytes));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("layer 0"), std::string::npos);
  }
  const auto longer = parse_architecture("4x4x1 2c3-p2-2c1-fc3");
  EXPECT_EQ(kind_of([&] { bind_weights(longer, parse_weight_file(bytes)); }), ErrorKind::Config);
}

TEST(WeightFile, RandomWeightsAreSeeded) {
  const auto c = parse_architecture("8x8x2 4c3-fc3");
  EXPECT_EQ(random_weights(c, 9), random_weights(c, 9));
  EXPECT_NE(random_weights(c, 9), random_weights(c, 10));
}

TEST(Files, WriteThenRead) {
  const auto path = std::filesystem::temp_directory_path() / "stisnn_io_test.bin";
  const std::vector<std::uint8_t> data{1, 2, 3, 250};
  write_file(path, data);
  EXPECT_EQ(read_file(path), data);
  std::filesystem::remove(path);
}
