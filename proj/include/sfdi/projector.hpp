#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sfdi/frame_stack.hpp"
#include "sfdi/optics.hpp"

namespace sfdi {

/// Two illuminated fiber cores acting as a double slit.
struct FiberPair {
  double spacing_um = 10.0;
  double wavelength_nm = 660.0;
  double working_distance_mm = 50.0;
};

/// Core spacings available on the seven-core tip, in micrometres.
inline constexpr double kTipSpacingsUm[] = {5.0, 8.66, 10.0};

/// Small-angle double-slit fringe frequency at the sample plane: fx = d / (lambda * WD).
SpatialFrequency spatial_frequency(const FiberPair& pair);

/// Per-pixel optical properties of the imaged sample.
class SampleField {
 public:
  SampleField() = default;
  SampleField(int width, int height, std::vector<OpticalProperties> props);

  static SampleField homogeneous(int width, int height, const OpticalProperties& props);
  /// Upper rows get `top`, lower rows get `bottom`.
  static SampleField split_rows(int width, int height, const OpticalProperties& top,
                                const OpticalProperties& bottom);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const OpticalProperties& at(int y, int x) const {
    return props_[static_cast<std::size_t>(y) * width_ + x];
  }
  bool uniform() const noexcept;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<OpticalProperties> props_;
};

enum class EnvelopeShape { flat, gaussian };

struct Envelope {
  EnvelopeShape shape = EnvelopeShape::gaussian;
  double center_x = -1.0;  ///< pixels; negative means frame centre
  double center_y = -1.0;
  double sigma_x_px = 60.0;
  double sigma_y_px = 60.0;
  double gain = 1.0;
};

struct DriftModel {
  double random_walk_std_deg = 10.0;  ///< Gaussian step std per frame
  double linear_deg_per_frame = 0.0;
};

struct ContrastDropout {
  double probability = 0.0;
  double depth = 0.0;  ///< fraction of fringe visibility lost in a dropout frame
};

struct FringeScene {
  int width = 160;
  int height = 120;
  double pixel_mm = 0.21;  ///< sample-plane pixel pitch
  SpatialFrequency fx{0.3};
  Envelope envelope;
  double phase0_deg = 0.0;
  DriftModel drift;
  ContrastDropout dropout;
  double fringe_visibility = 0.9;
  double noise_std = 0.0;
  double speckle_contrast = 0.0;
  double speckle_grain_px = 1.5;
  double refractive_index = kDefaultRefractiveIndex;
  double frame_rate = kDefaultFrameRate;
  bool quantize_12bit = false;
  SampleField sample;

  void validate() const;
};

using ForwardModel = std::function<DiffuseReflectancePair(const OpticalProperties&, SpatialFrequency)>;

struct RenderedVideo {
  FrameStack stack;
  std::vector<double> phase_deg;  ///< ground-truth fringe phase at column 0, [0, 360)
  std::vector<double> contrast;   ///< ground-truth fringe visibility per frame
};

/// Renders I = gain * envelope * speckle * (Rd_DC + m(t) Rd_AC cos(2 pi fx x + phi(t))) + noise,
/// clipped to [0, 1]. Deterministic in `seed`.
RenderedVideo render_fringe_video(const FringeScene& scene, int n_frames, std::uint64_t seed,
                                  const ForwardModel& forward = {});

/// Multiplicative unit-mean speckle field; one realization per (seed, fx).
ImageF speckle_field(int width, int height, double contrast, double grain_px, std::uint64_t seed,
                     SpatialFrequency fx);

/// Interleaves single-channel stacks into one multi-channel stack, zero-padding extra channels.
FrameStack combine_channels(std::span<const FrameStack> channels, int n_channels);

/// Time-averaged frame, then averaged over the row band; one value per column.
std::vector<double> envelope_profile(const FrameStack& stack, RowBand band = {}, int channel = 0);

}  // namespace sfdi
