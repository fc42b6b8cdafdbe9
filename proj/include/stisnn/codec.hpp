#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stisnn/error.hpp"
#include "stisnn/rational.hpp"
#include "stisnn/spike.hpp"

namespace stisnn {

/// Address bits needed for `n` positions; zero when n == 1.
constexpr std::size_t address_bits(std::size_t n) {
  return n <= 1 ? 0 : static_cast<std::size_t>(std::bit_width(n - 1));
}

/// Bits per spike event: row address, column address, channel mask.
constexpr std::size_t event_width(std::size_t height, std::size_t width, std::size_t channels) {
  return address_bits(height) + address_bits(width) + channels;
}

/// Sparse spike events for one frame. The payload is a bitstream of
/// `count` events laid out as y | x | mask, each field most significant bit
/// first (mask bit C-1 leads). Stream bit i lives in byte i/8 at bit i%8.
struct EventStream {
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint16_t channels = 0;
  std::uint32_t count = 0;
  std::vector<std::uint8_t> payload;

  std::size_t width_bits() const { return event_width(height, width, channels); }
  std::size_t payload_bits() const { return std::size_t{count} * width_bits(); }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

inline constexpr std::array<char, 4> kEventMagic{'S', 'T', 'I', 'E'};
inline constexpr std::uint8_t kEventVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 4 + 1 + 2 + 2 + 2 + 4;

namespace detail {

class BitWriter {
 public:
  void put(std::uint64_t value, std::size_t bits) {
    for (std::size_t i = bits; i-- > 0;) put_bit((value >> i) & 1u);
  }
  void put_bit(bool bit) {
    if (length_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(1u << (length_ % 8));
    ++length_;
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t length_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool get_bit() {
    const bool bit = (bytes_[pos_ / 8] >> (pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }
  std::uint64_t get(std::size_t bits) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < bits; ++i) v = (v << 1) | static_cast<std::uint64_t>(get_bit());
    return v;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
  }
}

template <class T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t{in[offset + i]} << (8 * i);
  return static_cast<T>(v);
}

}  // namespace detail

/// One event per pixel with any spike, in raster order.
inline EventStream encode_events(const SpikeFrame& frame) {
  require(frame.height() <= UINT16_MAX && frame.width() <= UINT16_MAX &&
              frame.channels() <= UINT16_MAX,
          ErrorKind::Shape, "frame dims exceed the 16-bit event header");
  EventStream stream;
  stream.height = static_cast<std::uint16_t>(frame.height());
  stream.width = static_cast<std::uint16_t>(frame.width());
  stream.channels = static_cast<std::uint16_t>(frame.channels());
  const std::size_t ybits = address_bits(frame.height());
  const std::size_t xbits = address_bits(frame.width());
  detail::BitWriter writer;
  for (std::size_t y = 0; y < frame.height(); ++y) {
    for (std::size_t x = 0; x < frame.width(); ++x) {
      const SpikeVector& v = frame.at(y, x);
      if (!v.any()) continue;
      writer.put(y, ybits);
      writer.put(x, xbits);
      for (std::size_t c = frame.channels(); c-- > 0;) writer.put_bit(v.test(c));
      ++stream.count;
    }
  }
  stream.payload = writer.take();
  return stream;
}

/// Inverse of encode_events. Rejects streams that encode_events could not
/// have produced.
inline SpikeFrame decode_events(const EventStream& stream) {
  const std::size_t bits = stream.payload_bits();
  require(stream.payload.size() == (bits + 7) / 8, ErrorKind::CorruptStream,
          "payload holds " + std::to_string(stream.payload.size()) + " bytes, header implies " +
              std::to_string((bits + 7) / 8));
  SpikeFrame frame(stream.height, stream.width, stream.channels);
  const std::size_t ybits = address_bits(stream.height);
  const std::size_t xbits = address_bits(stream.width);
  detail::BitReader reader(stream.payload);
  std::optional<std::size_t> last;
  for (std::uint32_t e = 0; e < stream.count; ++e) {
    const std::size_t y = reader.get(ybits);
    const std::size_t x = reader.get(xbits);
    require(y < stream.height && x < stream.width, ErrorKind::CorruptStream,
            "event " + std::to_string(e) + " addresses (" + std::to_string(y) + ", " +
                std::to_string(x) + ") outside the frame");
    const std::size_t linear = y * stream.width + x;
    require(!last || linear > *last, ErrorKind::CorruptStream,
            "event " + std::to_string(e) + " breaks raster order");
    last = linear;
    SpikeVector& v = frame.at(y, x);
    for (std::size_t c = stream.channels; c-- > 0;) {
      if (reader.get_bit()) v.set(c);
    }
    require(v.any(), ErrorKind::CorruptStream, "event " + std::to_string(e) + " has an empty mask");
  }
  while (reader.position() % 8 != 0) {
    require(!reader.get_bit(), ErrorKind::CorruptStream, "nonzero padding bits");
  }
  return frame;
}

/// Serialized layout: "STIE", u8 version, u16 H, u16 W, u16 C, u32 count,
/// payload. Integers little-endian.
inline std::vector<std::uint8_t> serialize(const EventStream& stream) {
  std::vector<std::uint8_t> out(kEventMagic.begin(), kEventMagic.end());
  out.push_back(kEventVersion);
  detail::put_le(out, stream.height);
  detail::put_le(out, stream.width);
  detail::put_le(out, stream.channels);
  detail::put_le(out, stream.count);
  out.insert(out.end(), stream.payload.begin(), stream.payload.end());
  return out;
}

inline EventStream parse_event_stream(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= kEventHeaderBytes, ErrorKind::CorruptStream, "truncated event header");
  require(std::equal(kEventMagic.begin(), kEventMagic.end(), bytes.begin()),
          ErrorKind::CorruptStream, "bad event stream magic");
  require(bytes[4] == kEventVersion, ErrorKind::CorruptStream,
          "unsupported event stream version " + std::to_string(bytes[4]));
  EventStream stream;
  stream.height = detail::get_le<std::uint16_t>(bytes, 5);
  stream.width = detail::get_le<std::uint16_t>(bytes, 7);
  stream.channels = detail::get_le<std::uint16_t>(bytes, 9);
  stream.count = detail::get_le<std::uint32_t>(bytes, 11);
  require(stream.height >= 1 && stream.width >= 1 && stream.channels >= 1,
          ErrorKind::CorruptStream, "event header dims must be positive");
  const std::size_t expected = (stream.payload_bits() + 7) / 8;
  require(bytes.size() - kEventHeaderBytes == expected, ErrorKind::CorruptStream,
          "payload length " + std::to_string(bytes.size() - kEventHeaderBytes) +
              " does not match " + std::to_string(stream.count) + " events");
  stream.payload.assign(bytes.begin() + kEventHeaderBytes, bytes.end());
  return stream;
}

/// Dense bits over encoded payload bits; empty when the frame has no events.
inline std::optional<Rational> compression_ratio(const SpikeFrame& frame) {
  const std::size_t events = frame.active_pixels();
  if (events == 0) return std::nullopt;
  return Rational(frame.neurons(),
                  events * event_width(frame.height(), frame.width(), frame.channels()));
}

}  // namespace stisnn
