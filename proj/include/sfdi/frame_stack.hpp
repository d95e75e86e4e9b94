#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sfdi/grid.hpp"

namespace sfdi {

inline constexpr double kDefaultFrameRate = 10.0;

/// Horizontal band of rows averaged into a 1-D profile. center < 0 means the middle row.
struct RowBand {
  int rows = 11;
  int center = -1;

  /// Half-open [first, last) rows for an image of `height` rows; throws if out of bounds.
  std::pair<int, int> resolve(int height) const;
};

/// Time-ordered stack of intensity frames normalized to [0, 1].
/// Storage is frame-major, row-major, channel-interleaved.
class FrameStack {
 public:
  FrameStack() = default;
  FrameStack(int width, int height, int n_frames, int n_channels,
             double frame_rate = kDefaultFrameRate, int bit_depth = 32);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int frames() const noexcept { return n_frames_; }
  int channels() const noexcept { return n_channels_; }
  double frame_rate() const noexcept { return frame_rate_; }
  int bit_depth() const noexcept { return bit_depth_; }
  void set_frame_rate(double fps);
  void set_bit_depth(int bits);

  float& at(int frame, int y, int x, int channel = 0) {
    return data_[offset(frame, y, x, channel)];
  }
  float at(int frame, int y, int x, int channel = 0) const {
    return data_[offset(frame, y, x, channel)];
  }

  ImageF frame(int index, int channel = 0) const;
  void set_frame(int index, const ImageF& image, int channel = 0);

  std::vector<float>& raw() noexcept { return data_; }
  const std::vector<float>& raw() const noexcept { return data_; }

  friend bool operator==(const FrameStack&, const FrameStack&) = default;

 private:
  std::size_t offset(int frame, int y, int x, int channel) const noexcept {
    return ((static_cast<std::size_t>(frame) * height_ + y) * width_ + x) * n_channels_ + channel;
  }

  int width_ = 0;
  int height_ = 0;
  int n_frames_ = 0;
  int n_channels_ = 1;
  double frame_rate_ = kDefaultFrameRate;
  int bit_depth_ = 32;
  std::vector<float> data_;
};

}  // namespace sfdi
