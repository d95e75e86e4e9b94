#pragma once

#include <span>
#include <vector>

#include "sfdi/grid.hpp"

namespace sfdi {

/// Sampled Gaussian normalized to unit sum, radius = floor(truncate * sigma + 0.5).
std::vector<double> gaussian_kernel(double sigma, double truncate = 4.0);

/// Separable convolution with half-sample symmetric ("reflect") boundaries.
/// The kernel must be odd-length and symmetric.
MapD convolve_separable(const MapD& image, std::span<const double> kernel);

/// Centered moving average; the window shrinks symmetrically near the ends.
std::vector<double> moving_average(std::span<const double> values, int window);

}  // namespace sfdi
