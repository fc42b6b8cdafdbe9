#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"
#include "stisnn/codec.hpp"

using namespace stisnn;

namespace {

// Stream bit i of the payload.
bool bit(const EventStream& s, std::size_t i) { return (s.payload[i / 8] >> (i % 8)) & 1u; }

ErrorKind decode_kind(const EventStream& s) {
  try {
    decode_events(s);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;  // sentinel: no error raised
}

}  // namespace

TEST(EventWidth, Examples) {
  EXPECT_EQ(event_width(4, 4, 3), 7u);
  EXPECT_EQ(event_width(28, 28, 16), 26u);
  EXPECT_EQ(event_width(1, 1, 8), 8u);
  EXPECT_EQ(address_bits(1), 0u);
  EXPECT_EQ(address_bits(2), 1u);
  EXPECT_EQ(address_bits(5), 3u);
  EXPECT_EQ(address_bits(8), 3u);
  EXPECT_EQ(address_bits(9), 4u);
}

TEST(EncodeEvents, SingleEventBitLayout) {
  SpikeFrame f(4, 4, 3);
  f.set(1, 2, 0);
  f.set(1, 2, 2);
  const EventStream s = encode_events(f);
  ASSERT_EQ(s.count, 1u);
  ASSERT_EQ(s.payload_bits(), 7u);
  // y=01, x=10, mask c2..c0 = 101
  const int want[] = {0, 1, 1, 0, 1, 0, 1};
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(bit(s, i), want[i] != 0) << "bit " << i;
  EXPECT_FALSE(bit(s, 7));
}

TEST(EncodeEvents, EmptyFrame) {
  const EventStream s = encode_events(SpikeFrame(3, 3, 2));
  EXPECT_EQ(s.count, 0u);
  EXPECT_TRUE(s.payload.empty());
  EXPECT_EQ(decode_events(s), SpikeFrame(3, 3, 2));
}

TEST(EncodeEvents, RoundTripFuzz) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t h = 1 + rng() % 20, w = 1 + rng() % 20, c = 1 + rng() % 70;
    const double density = (rng() % 100) / 100.0;
    const SpikeFrame f = oracle::random_frame(rng, h, w, c, density);
    const EventStream s = encode_events(f);
    EXPECT_EQ(s.count, f.active_pixels());
    EXPECT_EQ(s.payload.size(), (s.count * event_width(h, w, c) + 7) / 8);
    ASSERT_EQ(decode_events(s), f);
    const auto bytes = serialize(s);
    EXPECT_EQ(bytes.size(), kEventHeaderBytes + s.payload.size());
    EXPECT_EQ(parse_event_stream(bytes), s);
  }
}

TEST(DecodeEvents, RejectsOutOfRangeAddress) {
  // 3x3 uses 2 address bits; y = 3 is outside.
  EventStream s{3, 3, 1, 1, {}};
  // y=11, x=00, mask=1 -> bits 1,1,0,0,1
  s.payload = {0b10011};
  EXPECT_EQ(decode_kind(s), ErrorKind::CorruptStream);
}

TEST(DecodeEvents, RejectsOutOfOrderAndDuplicates) {
  SpikeFrame f(4, 4, 1);
  f.set(0, 1, 0);
  f.set(2, 3, 0);
  const EventStream good = encode_events(f);
  ASSERT_EQ(good.count, 2u);
  // Swap the two 5-bit events.
  detail::BitReader r(good.payload);
  const auto a = r.get(5), b = r.get(5);
  detail::BitWriter w;
  w.put(b, 5);
  w.put(a, 5);
  EventStream swapped = good;
  swapped.payload = w.take();
  EXPECT_EQ(decode_kind(swapped), ErrorKind::CorruptStream);

  detail::BitWriter d;
  d.put(a, 5);
  d.put(a, 5);
  EventStream dup = good;
  dup.payload = d.take();
  EXPECT_EQ(decode_kind(dup), ErrorKind::CorruptStream);
}

TEST(DecodeEvents, RejectsEmptyMaskAndPadding) {
  EventStream empty{2, 2, 2, 1, {0}};  // y=0, x=0, mask=00
  EXPECT_EQ(decode_kind(empty), ErrorKind::CorruptStream);

  SpikeFrame f(2, 2, 1);
  f.set(1, 1, 0);
  EventStream s = encode_events(f);
  s.payload[0] |= 0x80;  // stray bit past the last event
  EXPECT_EQ(decode_kind(s), ErrorKind::CorruptStream);
}

TEST(DecodeEvents, RejectsLengthMismatch) {
  SpikeFrame f(4, 4, 8);
  f.set(0, 0, 0);
  f.set(3, 3, 7);
  EventStream s = encode_events(f);
  s.payload.push_back(0);
  EXPECT_EQ(decode_kind(s), ErrorKind::CorruptStream);
  s.payload.resize(1);
  EXPECT_EQ(decode_kind(s), ErrorKind::CorruptStream);
}

TEST(ParseEventStream, RejectsBadHeaders) {
  SpikeFrame f(4, 4, 3);
  f.set(1, 2, 0);
  const auto good = serialize(encode_events(f));
  auto expect_corrupt = [](std::vector<std::uint8_t> bytes) {
    try {
      parse_event_stream(bytes);
      ADD_FAILURE() << "accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::CorruptStream);
    }
  };
  auto bad = good;
  bad[0] = 'X';
  expect_corrupt(bad);
  bad = good;
  bad[4] = 2;
  expect_corrupt(bad);
  expect_corrupt(std::vector<std::uint8_t>(good.begin(), good.begin() + 10));
  bad = good;
  bad.pop_back();
  expect_corrupt(bad);
  bad = good;
  bad[11] = 5;  // count
  expect_corrupt(bad);
}

TEST(CompressionRatio, Examples) {
  EXPECT_FALSE(compression_ratio(SpikeFrame(4, 4, 3)));

  // All 16 pixels active: 48 dense bits over 16 * 7 encoded bits.
  SpikeFrame full(4, 4, 3);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) full.set(y, x, 0);
  EXPECT_EQ(*compression_ratio(full), Rational(3, 7));

  SpikeFrame one(4, 4, 3);
  one.set(2, 2, 1);
  EXPECT_EQ(*compression_ratio(one), Rational(48, 7));
}

TEST(CompressionRatio, EncodedSmallerExactlyBelowBreakEven) {
  std::mt19937 rng(22);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t h = 1 + rng() % 12, w = 1 + rng() % 12, c = 1 + rng() % 20;
    const SpikeFrame f = oracle::random_frame(rng, h, w, c, (rng() % 100) / 400.0);
    const std::size_t encoded = f.active_pixels() * event_width(h, w, c);
    const std::size_t dense = h * w * c;
    const auto r = compression_ratio(f);
    if (!r) {
      EXPECT_EQ(f.active_pixels(), 0u);
      continue;
    }
    EXPECT_EQ(r->value() > 1.0, encoded < dense);
    EXPECT_EQ(encode_events(f).payload_bits(), encoded);
  }
}
