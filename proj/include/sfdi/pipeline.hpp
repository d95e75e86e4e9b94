#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfdi/demod.hpp"
#include "sfdi/lut.hpp"
#include "sfdi/projector.hpp"

namespace sfdi {

/// Pixel classes stored in PropertyMap::mask.
enum MaskValue : unsigned char {
  kMaskInvalid = 0,
  kMaskValid = 1,
  kMaskOutOfRange = 2,  ///< reflectance outside the LUT; value clamped to the table edge
};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct AnalysisRegion {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  static AnalysisRegion centered(int width, int height, double fraction = 0.6);
  static AnalysisRegion full(int width, int height) { return {0, 0, width, height}; }
  void validate(int width, int height) const;
  bool contains(int y, int x) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct ReferenceCapture {
  std::string id;
  DemodulatedPair demod;
  OpticalProperties known_props;
};

/// Per-pixel calibrated diffuse reflectance.
struct ReflectanceMap {
  MapD rd_dc;
  MapD rd_ac;
  Mask valid;
  SpatialFrequency fx;
};

struct CalibrationConfig {
  double refractive_index = kDefaultRefractiveIndex;
  double division_floor = 1e-6;  ///< fraction of the reference maximum below which pixels are masked
};

struct Provenance {
  std::vector<std::string> references;
  std::vector<double> fx_per_mm;
  double wavelength_nm = 0.0;
  double sigma_px = 0.0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct PropertyMap {
  Grid2<float> mu_a;
  Grid2<float> mu_s_prime;
  Mask mask;
  Provenance provenance;

  int width() const noexcept { return mu_a.width(); }
  int height() const noexcept { return mu_a.height(); }
  friend bool operator==(const PropertyMap&, const PropertyMap&) = default;
};

/// Rd_sample = (M_sample / M_ref) * Rd_ref(model), separately for the AC and DC channels.
ReflectanceMap calibrate_reflectance(const DemodulatedPair& sample, const ReferenceCapture& ref,
                                     const AnalysisRegion& region,
                                     const CalibrationConfig& config = {},
                                     const ForwardModel& forward = {});

/// Per-pixel LUT inversion. Pixels outside the table are clamped and marked kMaskOutOfRange.
PropertyMap property_map(const ReflectanceMap& rd, const DiffusionLut& lut, double wavelength_nm);

/// Pointwise mean over the pixels valid in every input.
PropertyMap average_maps(std::span<const PropertyMap> maps);

/// Mask-aware Gaussian smoothing (normalized convolution over valid pixels).
PropertyMap smooth_map(const PropertyMap& map, double sigma_px = 5.0);

std::vector<FrameStack> split_channels(const FrameStack& stack);

struct CaptureConfig {
  SpatialFrequency fx{0.3};
  int channel = 0;
  TrackerConfig tracker;
};

/// Track, select a triplet and demodulate one capture.
DemodulatedPair process_capture(const FrameStack& stack, const CaptureConfig& config,
                                std::optional<FrameTriplet>* triplet_out = nullptr);

ReferenceCapture make_reference(const FrameStack& stack, const CaptureConfig& config,
                                const OpticalProperties& props, std::string id);

/// Everything measured at one spatial frequency.
struct FrequencyData {
  DemodulatedPair sample;
  std::vector<ReferenceCapture> references;
  std::shared_ptr<const DiffusionLut> lut;
};

struct PipelineConfig {
  std::optional<AnalysisRegion> region;  ///< defaults to a centred rectangle at 60% extent
  CalibrationConfig calibration;
  double sigma_px = 5.0;
  double wavelength_nm = 660.0;
};

/// One map per (frequency, reference) pair, averaged, then smoothed.
PropertyMap recover_properties(std::span<const FrequencyData> data, const PipelineConfig& config);

struct ChannelSetup {
  std::string name;
  CaptureConfig capture;
  double wavelength_nm = 660.0;
  std::shared_ptr<const DiffusionLut> lut;
  std::vector<ReferenceCapture> references;
};

struct ChannelOutcome {
  std::string name;
  std::optional<PropertyMap> map;
  std::optional<ErrorKind> error;
  std::string message;
  bool ok() const noexcept { return map.has_value(); }
};

/// Runs the full chain per colour channel; a failing channel does not abort the others.
std::vector<ChannelOutcome> run_dual_wavelength(const FrameStack& stack,
                                                std::span<const ChannelSetup> channels,
                                                const PipelineConfig& config);

struct RegionStats {
  std::string name;
  std::size_t pixels = 0;
  double mu_a_mean = 0.0, mu_a_std = 0.0;
  double mu_s_mean = 0.0, mu_s_std = 0.0;
};

RegionStats region_stats(const PropertyMap& map, const AnalysisRegion& region, std::string name);
void write_region_stats_csv(std::ostream& out, std::span<const RegionStats> stats);

// SFPM binary codec, PNG visualization.
std::vector<char> encode_property_map(const PropertyMap& map);
PropertyMap decode_property_map(std::span<const char> bytes);
void write_property_map(const std::filesystem::path& path, const PropertyMap& map);
PropertyMap read_property_map(const std::filesystem::path& path);

/// Colour-mapped PNG of one plane; values clamp to [lo, hi], invalid pixels are black.
void write_map_png(const std::filesystem::path& path, const Grid2<float>& plane, const Mask& mask,
                   double lo, double hi);

}  // namespace sfdi
