#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "stisnn/error.hpp"
#include "stisnn/spike.hpp"

namespace stisnn {

/// K_h x K_w spike vectors, row-major, one per PE position.
struct ReceptiveWindow {
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t out_y = 0;
  std::size_t out_x = 0;
  std::vector<SpikeVector> vectors;

  const SpikeVector& at(std::size_t kh, std::size_t kw) const {
    return vectors[kh * kernel_w + kw];
  }

  friend bool operator==(const ReceptiveWindow&, const ReceptiveWindow&) = default;
};

/// K_h FIFOs of depth W chained tail-to-head. Spike vectors enter the newest
/// FIFO in raster order; each FIFO's overflow feeds the next older one, so
/// the chain always holds the last K_h * W pushes and every pixel is fetched
/// once per frame.
class LineBuffer {
 public:
  LineBuffer(std::size_t width, std::size_t kernel_h, std::size_t kernel_w, std::size_t channels)
      : width_(width), kernel_h_(kernel_h), kernel_w_(kernel_w), channels_(channels),
        fifos_(kernel_h) {
    require(kernel_h >= 1 && kernel_w >= 1, ErrorKind::Shape, "line buffer kernel must be >= 1");
    require(kernel_w <= width, ErrorKind::Shape, "kernel wider than line");
  }

  std::size_t fifo_count() const noexcept { return kernel_h_; }
  std::size_t fifo_depth() const noexcept { return width_; }
  std::size_t entry_width() const noexcept { return channels_; }
  std::size_t resident() const noexcept {
    std::size_t n = 0;
    for (const auto& f : fifos_) n += f.size();
    return n;
  }
  std::size_t pushes() const noexcept { return pushed_; }

  /// Appends one pixel and returns the receptive window completed by it, if any.
  std::optional<ReceptiveWindow> push(const SpikeVector& v) {
    require(v.size() == channels_, ErrorKind::Shape,
            "spike vector width " + std::to_string(v.size()) + " != line buffer width " +
                std::to_string(channels_));
    std::optional<SpikeVector> carry = v;
    for (std::size_t k = kernel_h_; k-- > 0 && carry;) {
      fifos_[k].push_back(std::move(*carry));
      carry.reset();
      if (fifos_[k].size() > width_) {
        carry = std::move(fifos_[k].front());
        fifos_[k].pop_front();
      }
    }
    const std::size_t index = pushed_++;
    const std::size_t row = index / width_;
    const std::size_t col = index % width_;
    if (row + 1 < kernel_h_ || col + 1 < kernel_w_) return std::nullopt;

    ReceptiveWindow window{kernel_h_, kernel_w_, row + 1 - kernel_h_, col + 1 - kernel_w_, {}};
    window.vectors.reserve(kernel_h_ * kernel_w_);
    for (std::size_t kh = 0; kh < kernel_h_; ++kh) {
      for (std::size_t kw = 0; kw < kernel_w_; ++kw) {
        window.vectors.push_back(from_newest((kernel_h_ - 1 - kh) * width_ + (kernel_w_ - 1 - kw)));
      }
    }
    return window;
  }

  /// Drops all contents so the next push starts a new frame.
  void reset() {
    for (auto& f : fifos_) f.clear();
    pushed_ = 0;
  }

 private:
  // Entry `offset` positions behind the most recent push.
  const SpikeVector& from_newest(std::size_t offset) const {
    const auto& fifo = fifos_[kernel_h_ - 1 - offset / width_];
    return fifo[fifo.size() - 1 - offset % width_];
  }

  std::size_t width_;
  std::size_t kernel_h_;
  std::size_t kernel_w_;
  std::size_t channels_;
  std::vector<std::deque<SpikeVector>> fifos_;
  std::size_t pushed_ = 0;
};

}  // namespace stisnn
