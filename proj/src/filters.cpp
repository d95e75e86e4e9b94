#include "sfdi/filters.hpp"

#include <algorithm>
#include <cmath>

#include "sfdi/error.hpp"

namespace sfdi {

namespace {

int reflect_index(int i, int n) {
  // Half-sample symmetric extension: ... b a | a b c ... | c b a ...
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma, double truncate) {
  require(std::isfinite(sigma) && sigma > 0.0, "Gaussian sigma must be positive");
  const int radius = static_cast<int>(truncate * sigma + 0.5);
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

MapD convolve_separable(const MapD& image, std::span<const double> kernel) {
  require(kernel.size() % 2 == 1, "kernel length must be odd");
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = image.width();
  const int h = image.height();
  MapD tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * image(y, reflect_index(x + k, w));
      tmp(y, x) = acc;
    }
  MapD out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp(reflect_index(y + k, h), x);
      out(y, x) = acc;
    }
  return out;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  require(window >= 1, "smoothing window must be >= 1");
  const int n = static_cast<int>(values.size());
  const int half = window / 2;
  std::vector<double> out(values.size());
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    double acc = 0.0;
    for (int k = i - h; k <= i + h; ++k) acc += values[k];
    out[i] = acc / (2 * h + 1);
  }
  return out;
}

}  // namespace sfdi
