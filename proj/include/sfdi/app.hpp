#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfdi/clinical.hpp"
#include "sfdi/demod.hpp"
#include "sfdi/lut.hpp"
#include "sfdi/optics.hpp"

namespace sfdi {

namespace fs = std::filesystem;

/// One colour channel of the camera and the fiber pair lighting it.
struct ChannelConfig {
  std::string name = "red";
  int index = 0;
  double wavelength_nm = 660.0;
  std::optional<double> fx;  ///< explicit fx; otherwise derived from the fiber geometry
  double spacing_um = 10.0;
  double working_distance_mm = 50.0;

  SpatialFrequency resolved_fx() const;
};

struct ReferenceConfig {
  std::string id;
  fs::path file;
  OpticalProperties props;  ///< at props.wavelength_nm
  WavelengthShift shift;    ///< applied when a channel runs at another wavelength

  OpticalProperties props_at(double wavelength_nm) const;
};

/// Synthetic capture parameters for `simulate`.
struct SceneConfig {
  int width = 128;
  int height = 96;
  double pixel_mm = 0.35;
  int frames = 80;
  double noise_std = 0.0;
  double speckle_contrast = 0.0;
  double speckle_grain_px = 1.5;
  double visibility = 0.9;
  double random_walk_deg = 5.0;
  double linear_deg = 17.0;
  double dropout_probability = 0.0;
  double dropout_depth = 0.0;
  bool gaussian_envelope = true;
  double envelope_sigma_px = 60.0;
  bool quantize_12bit = false;
  OpticalProperties sample{0.01, 0.75, 660.0};
  std::optional<OpticalProperties> sample_bottom;  ///< lower half of the frame, if set
  WavelengthShift sample_shift;
};

struct ClinicalRunConfig {
  std::string healthy = "healthy";
  std::vector<TissueClassStats> classes;
  std::size_t n_train = 500;
  std::size_t n_validation = 500;
  DeviceNoiseModel noise;
};

struct RunConfig {
  std::string mode;
  std::vector<fs::path> inputs;
  fs::path out = "sfdi_out";
  std::uint64_t seed = 1;
  double frame_rate = kDefaultFrameRate;
  std::vector<ChannelConfig> channels{ChannelConfig{}};
  TrackerConfig tracker;
  LutSpec lut;
  std::optional<fs::path> lut_file;
  std::vector<ReferenceConfig> references;
  double sigma_px = 5.0;
  double region_fraction = 0.6;
  double division_floor = 1e-6;
  double png_mu_a_max = 0.04;
  double png_mu_s_max = 2.0;
  SceneConfig scene;
  ClinicalRunConfig clinical;

  /// Throws invalid_input naming the first missing or inconsistent field.
  void validate() const;
};

/// Reads an INI file into `config`, leaving absent keys at their current values.
void load_config(const fs::path& path, RunConfig& config);

/// Parses "path,mu_a,mu_s[,wavelength_nm]" as given to --ref.
ReferenceConfig parse_reference_arg(const std::string& arg);

/// Runs one mode end to end. Writes outputs plus manifest.json into config.out and returns the
/// process exit code; failures are reported on `log` and in the manifest.
int run(const RunConfig& config, std::ostream& log);

}  // namespace sfdi
