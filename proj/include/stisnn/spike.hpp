#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stisnn/error.hpp"

namespace stisnn {

/// Channel-packed binary spikes at one pixel. Bit j is channel j; storage
/// past the last channel is kept zero so word-wise comparisons are exact.
class SpikeVector {
 public:
  SpikeVector() = default;
  explicit SpikeVector(std::size_t channels)
      : channels_(channels), words_((channels + 63) / 64, 0) {}

  std::size_t size() const noexcept { return channels_; }

  bool test(std::size_t c) const {
    return (words_[c / 64] >> (c % 64)) & 1u;
  }
  void set(std::size_t c, bool value = true) {
    const std::uint64_t bit = std::uint64_t{1} << (c % 64);
    if (value) {
      words_[c / 64] |= bit;
    } else {
      words_[c / 64] &= ~bit;
    }
  }

  bool any() const noexcept {
    return std::any_of(words_.begin(), words_.end(), [](std::uint64_t w) { return w != 0; });
  }
  std::size_t count() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  SpikeVector& operator|=(const SpikeVector& other) {
    require(other.channels_ == channels_, ErrorKind::Shape, "spike vector width mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
  }

  friend bool operator==(const SpikeVector&, const SpikeVector&) = default;

 private:
  std::size_t channels_ = 0;
  std::vector<std::uint64_t> words_;
};

/// One timestep's binary feature map: H x W pixels of C-channel spike vectors.
class SpikeFrame {
 public:
  SpikeFrame() = default;
  SpikeFrame(std::size_t height, std::size_t width, std::size_t channels)
      : height_(height), width_(width), channels_(channels),
        grid_(height * width, SpikeVector(channels)) {}

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t neurons() const noexcept { return height_ * width_ * channels_; }

  const SpikeVector& at(std::size_t y, std::size_t x) const { return grid_[y * width_ + x]; }
  SpikeVector& at(std::size_t y, std::size_t x) { return grid_[y * width_ + x]; }

  bool test(std::size_t y, std::size_t x, std::size_t c) const { return at(y, x).test(c); }
  void set(std::size_t y, std::size_t x, std::size_t c, bool value = true) {
    at(y, x).set(c, value);
  }

  std::size_t spike_count() const noexcept {
    std::size_t n = 0;
    for (const auto& v : grid_) n += v.count();
    return n;
  }
  std::size_t active_pixels() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(grid_.begin(), grid_.end(), [](const SpikeVector& v) { return v.any(); }));
  }

  bool same_shape(const SpikeFrame& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const SpikeFrame&, const SpikeFrame&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<SpikeVector> grid_;
};

/// T frames of identical shape.
class SpikeTensor {
 public:
  SpikeTensor() = default;
  explicit SpikeTensor(std::vector<SpikeFrame> frames) : frames_(std::move(frames)) {
    require(!frames_.empty(), ErrorKind::Shape, "spike tensor needs at least one timestep");
    for (const auto& f : frames_) {
      require(f.same_shape(frames_.front()), ErrorKind::Shape,
              "spike tensor frames differ in shape");
    }
  }

  std::size_t timesteps() const noexcept { return frames_.size(); }
  const SpikeFrame& frame(std::size_t t) const { return frames_.at(t); }
  const std::vector<SpikeFrame>& frames() const noexcept { return frames_; }

  friend bool operator==(const SpikeTensor&, const SpikeTensor&) = default;

 private:
  std::vector<SpikeFrame> frames_;
};

}  // namespace stisnn
