#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "stisnn/error.hpp"
#include "stisnn/network.hpp"

namespace stisnn {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temp file, then renames over the target.
inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Unsigned-byte IDX tensor (MNIST layout).
struct IdxTensor {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

inline IdxTensor parse_idx(std::span<const std::uint8_t> bytes) {
  auto be32 = [&](std::size_t off) {
    return (std::uint32_t{bytes[off]} << 24) | (std::uint32_t{bytes[off + 1]} << 16) |
           (std::uint32_t{bytes[off + 2]} << 8) | std::uint32_t{bytes[off + 3]};
  };
  require(bytes.size() >= 4, ErrorKind::Format, "truncated IDX header");
  IdxTensor t;
  t.magic = be32(0);
  require(t.magic == kIdxImagesMagic || t.magic == kIdxLabelsMagic, ErrorKind::Format,
          "bad IDX magic");
  const std::size_t rank = t.magic & 0xff;
  require(bytes.size() >= 4 + 4 * rank, ErrorKind::Format, "truncated IDX dims");
  std::size_t total = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    t.dims.push_back(be32(4 + 4 * i));
    total *= t.dims.back();
  }
  const std::size_t offset = 4 + 4 * rank;
  require(bytes.size() - offset == total, ErrorKind::Format,
          "IDX payload holds " + std::to_string(bytes.size() - offset) + " bytes, header implies " +
              std::to_string(total));
  t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return t;
}

inline IdxTensor load_idx(const std::filesystem::path& path) { return parse_idx(read_file(path)); }

inline std::vector<std::uint8_t> serialize_idx(const IdxTensor& t) {
  std::vector<std::uint8_t> out;
  auto put32 = [&](std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  };
  put32(t.magic);
  for (auto d : t.dims) put32(d);
  out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

/// Splits an image IDX tensor (N, H, W) into single-channel images.
inline std::vector<Image> images_from_idx(const IdxTensor& t) {
  require(t.magic == kIdxImagesMagic && t.dims.size() == 3, ErrorKind::Format,
          "expected an (N, H, W) image IDX file");
  const std::size_t n = t.dims[0], h = t.dims[1], w = t.dims[2];
  std::vector<Image> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto first = t.data.begin() + static_cast<std::ptrdiff_t>(i * h * w);
    images.push_back({h, w, 1, std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(h * w))});
  }
  return images;
}

inline std::vector<std::uint8_t> labels_from_idx(const IdxTensor& t) {
  require(t.magic == kIdxLabelsMagic && t.dims.size() == 1, ErrorKind::Format,
          "expected a 1-D label IDX file");
  return t.data;
}

}  // namespace stisnn
