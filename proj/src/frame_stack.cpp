#include "sfdi/frame_stack.hpp"

#include <cmath>

namespace sfdi {

namespace {

bool supported_depth(int bits) { return bits == 8 || bits == 12 || bits == 16 || bits == 32; }

}  // namespace

std::pair<int, int> RowBand::resolve(int height) const {
  require(rows >= 1, "row band must contain at least one row");
  const int mid = center < 0 ? height / 2 : center;
  const int first = mid - rows / 2;
  const int last = first + rows;
  require(first >= 0 && last <= height, "row band lies outside the image");
  return {first, last};
}

FrameStack::FrameStack(int width, int height, int n_frames, int n_channels,
                       double frame_rate, int bit_depth)
    : width_(width), height_(height), n_frames_(n_frames), n_channels_(n_channels) {
  require(width > 0 && height > 0, "frame dimensions must be positive");
  require(n_frames >= 0, "frame count must be non-negative");
  require(n_channels >= 1 && n_channels <= 255, "channel count must be in [1, 255]");
  set_frame_rate(frame_rate);
  set_bit_depth(bit_depth);
  data_.assign(static_cast<std::size_t>(width) * height * n_frames * n_channels, 0.0f);
}

void FrameStack::set_frame_rate(double fps) {
  require(std::isfinite(fps) && fps > 0.0, "frame rate must be positive");
  frame_rate_ = fps;
}

void FrameStack::set_bit_depth(int bits) {
  require(supported_depth(bits), "bit depth must be one of 8, 12, 16, 32");
  bit_depth_ = bits;
}

ImageF FrameStack::frame(int index, int channel) const {
  require(index >= 0 && index < n_frames_, "frame index out of range");
  require(channel >= 0 && channel < n_channels_, "channel index out of range");
  ImageF out(width_, height_);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) out(y, x) = at(index, y, x, channel);
  return out;
}

void FrameStack::set_frame(int index, const ImageF& image, int channel) {
  require(index >= 0 && index < n_frames_, "frame index out of range");
  require(channel >= 0 && channel < n_channels_, "channel index out of range");
  require(image.width() == width_ && image.height() == height_, "frame shape mismatch");
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) at(index, y, x, channel) = image(y, x);
}

}  // namespace sfdi
