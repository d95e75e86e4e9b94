#include "sfdi/projector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>

#include "sfdi/error.hpp"
#include "sfdi/filters.hpp"

namespace sfdi {

namespace {

double wrap_deg(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  return w >= 360.0 ? 0.0 : w;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id, std::uint64_t sub = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(sub),
                    static_cast<std::uint32_t>(sub >> 32)};
  return std::mt19937_64(seq);
}

double envelope_at(const Envelope& env, int width, int height, int y, int x) {
  if (env.shape == EnvelopeShape::flat) return env.gain;
  const double cx = env.center_x < 0.0 ? 0.5 * (width - 1) : env.center_x;
  const double cy = env.center_y < 0.0 ? 0.5 * (height - 1) : env.center_y;
  const double dx = (x - cx) / env.sigma_x_px;
  const double dy = (y - cy) / env.sigma_y_px;
  return env.gain * std::exp(-0.5 * (dx * dx + dy * dy));
}

}  // namespace

SpatialFrequency spatial_frequency(const FiberPair& pair) {
  require(std::isfinite(pair.spacing_um) && pair.spacing_um > 0.0, "fiber spacing must be positive");
  require(std::isfinite(pair.wavelength_nm) && pair.wavelength_nm > 0.0,
          "wavelength must be positive");
  require(std::isfinite(pair.working_distance_mm) && pair.working_distance_mm > 0.0,
          "working distance must be positive");
  const double spacing_mm = pair.spacing_um * 1e-3;
  const double wavelength_mm = pair.wavelength_nm * 1e-6;
  return SpatialFrequency{spacing_mm / (wavelength_mm * pair.working_distance_mm)};
}

SampleField::SampleField(int width, int height, std::vector<OpticalProperties> props)
    : width_(width), height_(height), props_(std::move(props)) {
  require(width > 0 && height > 0, "sample field dimensions must be positive");
  require(props_.size() == static_cast<std::size_t>(width) * height,
          "sample field size does not match dimensions");
  for (const auto& p : props_) p.validate();
}

SampleField SampleField::homogeneous(int width, int height, const OpticalProperties& props) {
  return SampleField(width, height,
                     std::vector<OpticalProperties>(static_cast<std::size_t>(width) * height, props));
}

SampleField SampleField::split_rows(int width, int height, const OpticalProperties& top,
                                    const OpticalProperties& bottom) {
  std::vector<OpticalProperties> props(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      props[static_cast<std::size_t>(y) * width + x] = y < height / 2 ? top : bottom;
  return SampleField(width, height, std::move(props));
}

bool SampleField::uniform() const noexcept {
  return std::all_of(props_.begin(), props_.end(),
                     [&](const OpticalProperties& p) { return p == props_.front(); });
}

void FringeScene::validate() const {
  require(width > 0 && height > 0, "scene dimensions must be positive");
  require(std::isfinite(pixel_mm) && pixel_mm > 0.0, "pixel pitch must be positive");
  require(envelope.gain >= 0.0 && std::isfinite(envelope.gain), "envelope gain must be >= 0");
  require(envelope.shape == EnvelopeShape::flat ||
              (envelope.sigma_x_px > 0.0 && envelope.sigma_y_px > 0.0),
          "Gaussian envelope widths must be positive");
  require(drift.random_walk_std_deg >= 0.0, "drift step std must be >= 0");
  require(dropout.probability >= 0.0 && dropout.probability <= 1.0,
          "dropout probability must be in [0, 1]");
  require(dropout.depth >= 0.0 && dropout.depth <= 1.0, "dropout depth must be in [0, 1]");
  require(fringe_visibility >= 0.0 && fringe_visibility <= 1.0,
          "fringe visibility must be in [0, 1]");
  require(noise_std >= 0.0, "noise std must be >= 0");
  require(speckle_contrast >= 0.0, "speckle contrast must be >= 0");
  require(std::isfinite(frame_rate) && frame_rate > 0.0, "frame rate must be positive");
  require(sample.width() == width && sample.height() == height,
          "sample field does not match scene dimensions");
}

ImageF speckle_field(int width, int height, double contrast, double grain_px, std::uint64_t seed,
                     SpatialFrequency fx) {
  ImageF out(width, height, 1.0f);
  if (contrast <= 0.0) return out;
  auto rng = stream(seed, 0x5BEC1E, std::bit_cast<std::uint64_t>(fx.per_mm()));
  std::normal_distribution<double> gauss(0.0, 1.0);
  MapD white(width, height);
  for (auto& v : white.values()) v = gauss(rng);
  const MapD grain = grain_px > 0.0 ? convolve_separable(white, gaussian_kernel(grain_px)) : white;

  double mean = 0.0, sq = 0.0;
  for (double v : grain.values()) mean += v;
  mean /= static_cast<double>(grain.size());
  for (double v : grain.values()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(grain.size()));
  for (std::size_t i = 0; i < grain.size(); ++i) {
    const double unit = sd > 0.0 ? (grain[i] - mean) / sd : 0.0;
    out[i] = static_cast<float>(std::max(0.05, 1.0 + contrast * unit));
  }
  return out;
}

RenderedVideo render_fringe_video(const FringeScene& scene, int n_frames, std::uint64_t seed,
                                  const ForwardModel& forward) {
  scene.validate();
  require(n_frames >= 1, "need at least one frame");
  const int w = scene.width;
  const int h = scene.height;

  ForwardModel model = forward;
  if (!model) {
    const double n = scene.refractive_index;
    model = [n](const OpticalProperties& p, SpatialFrequency fx) { return reflectance_pair(p, fx, n); };
  }

  // Static per-pixel terms: gain * envelope * speckle * Rd.
  MapD dc_term(w, h), ac_term(w, h);
  const ImageF speckle =
      speckle_field(w, h, scene.speckle_contrast, scene.speckle_grain_px, seed, scene.fx);
  const bool uniform = scene.sample.uniform();
  const DiffuseReflectancePair uniform_rd =
      uniform ? model(scene.sample.at(0, 0), scene.fx) : DiffuseReflectancePair{};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto rd = uniform ? uniform_rd : model(scene.sample.at(y, x), scene.fx);
      const double base = envelope_at(scene.envelope, w, h, y, x) * speckle(y, x);
      dc_term(y, x) = base * rd.rd_dc;
      ac_term(y, x) = base * rd.rd_ac;
    }

  RenderedVideo out;
  out.stack = FrameStack(w, h, n_frames, 1, scene.frame_rate, scene.quantize_12bit ? 12 : 32);
  out.phase_deg.resize(static_cast<std::size_t>(n_frames));
  out.contrast.resize(static_cast<std::size_t>(n_frames));

  auto drift_rng = stream(seed, 0xD21F7);
  std::normal_distribution<double> step(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double phase = scene.phase0_deg;
  for (int t = 0; t < n_frames; ++t) {
    if (t > 0) phase += scene.drift.linear_deg_per_frame + scene.drift.random_walk_std_deg * step(drift_rng);
    const bool dropped = unit(drift_rng) < scene.dropout.probability;
    out.phase_deg[t] = wrap_deg(phase);
    out.contrast[t] = scene.fringe_visibility * (dropped ? 1.0 - scene.dropout.depth : 1.0);
  }

  const double k = 2.0 * std::numbers::pi * scene.fx.per_mm() * scene.pixel_mm;
  for (int t = 0; t < n_frames; ++t) {
    auto noise_rng = stream(seed, 0x4015E, static_cast<std::uint64_t>(t));
    std::normal_distribution<double> noise(0.0, scene.noise_std > 0.0 ? scene.noise_std : 1.0);
    const double phi = out.phase_deg[t] * std::numbers::pi / 180.0;
    const double m = out.contrast[t];
    std::vector<double> carrier(static_cast<std::size_t>(w));
    for (int x = 0; x < w; ++x) carrier[x] = std::cos(k * x + phi);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double v = dc_term(y, x) + m * ac_term(y, x) * carrier[x];
        if (scene.noise_std > 0.0) v += noise(noise_rng);
        v = std::clamp(v, 0.0, 1.0);
        if (scene.quantize_12bit) v = std::round(v * 4095.0) / 4095.0;
        out.stack.at(t, y, x) = static_cast<float>(v);
      }
  }
  return out;
}

FrameStack combine_channels(std::span<const FrameStack> channels, int n_channels) {
  require(!channels.empty(), "no channels to combine");
  require(n_channels >= static_cast<int>(channels.size()), "too many input channels");
  const auto& first = channels.front();
  for (const auto& c : channels) {
    require(c.channels() == 1, "combine_channels expects single-channel stacks");
    require(c.width() == first.width() && c.height() == first.height() &&
                c.frames() == first.frames(),
            "channel stacks must share shape and frame count");
  }
  FrameStack out(first.width(), first.height(), first.frames(), n_channels, first.frame_rate(),
                 first.bit_depth());
  for (std::size_t c = 0; c < channels.size(); ++c)
    for (int t = 0; t < first.frames(); ++t)
      for (int y = 0; y < first.height(); ++y)
        for (int x = 0; x < first.width(); ++x)
          out.at(t, y, x, static_cast<int>(c)) = channels[c].at(t, y, x);
  return out;
}

std::vector<double> envelope_profile(const FrameStack& stack, RowBand band, int channel) {
  require(stack.frames() >= 1, "envelope profile needs a non-empty stack");
  require(channel >= 0 && channel < stack.channels(), "channel index out of range");
  const auto [first, last] = band.resolve(stack.height());
  std::vector<double> profile(static_cast<std::size_t>(stack.width()), 0.0);
  for (int t = 0; t < stack.frames(); ++t)
    for (int y = first; y < last; ++y)
      for (int x = 0; x < stack.width(); ++x) profile[x] += stack.at(t, y, x, channel);
  const double norm = static_cast<double>(stack.frames()) * (last - first);
  for (auto& v : profile) v /= norm;
  return profile;
}

}  // namespace sfdi
