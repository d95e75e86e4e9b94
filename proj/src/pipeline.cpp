#include "sfdi/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "sfdi/filters.hpp"

namespace sfdi {
namespace {

// Splits [0, rows) into contiguous chunks, one per hardware thread.
template <typename F>
void parallel_rows(int rows, F&& body) {
  const int workers =
      std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, std::max(1, rows / 16));
  if (workers <= 1) {
    for (int y = 0; y < rows; ++y) body(y);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (rows + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int y0 = w * chunk;
    const int y1 = std::min(rows, y0 + chunk);
    if (y0 >= y1) break;
    pool.emplace_back([&body, y0, y1] {
      for (int y = y0; y < y1; ++y) body(y);
    });
  }
  for (auto& t : pool) t.join();
}

double region_max(const MapD& m, const AnalysisRegion& r) {
  double best = 0.0;
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      if (std::isfinite(m(y, x))) best = std::max(best, m(y, x));
  return best;
}

}  // namespace

AnalysisRegion AnalysisRegion::centered(int width, int height, double fraction) {
  require(width > 0 && height > 0, "analysis region needs a non-empty frame");
  require(fraction > 0.0 && fraction <= 1.0, "analysis region fraction must be in (0, 1]");
  const int w = std::max(1, static_cast<int>(std::lround(width * fraction)));
  const int h = std::max(1, static_cast<int>(std::lround(height * fraction)));
  const int x0 = (width - w) / 2;
  const int y0 = (height - h) / 2;
  return {x0, y0, x0 + w, y0 + h};
}

void AnalysisRegion::validate(int width, int height) const {
  require(x0 < x1 && y0 < y1, "analysis region is empty");
  require(x0 >= 0 && y0 >= 0 && x1 <= width && y1 <= height,
          "analysis region exceeds the image bounds");
}

ReflectanceMap calibrate_reflectance(const DemodulatedPair& sample, const ReferenceCapture& ref,
                                     const AnalysisRegion& region,
                                     const CalibrationConfig& config,
                                     const ForwardModel& forward) {
  require(sample.fx == ref.demod.fx, "sample and reference were captured at different fx");
  require(sample.m_dc.same_shape(ref.demod.m_dc) && sample.m_ac.same_shape(ref.demod.m_ac) &&
              sample.m_ac.same_shape(sample.m_dc),
          "sample and reference maps differ in shape");
  require(config.division_floor >= 0.0, "division floor must be non-negative");
  ref.known_props.validate();
  const int w = sample.m_dc.width();
  const int h = sample.m_dc.height();
  region.validate(w, h);

  const DiffuseReflectancePair pred =
      forward ? forward(ref.known_props, sample.fx)
              : reflectance_pair(ref.known_props, sample.fx, config.refractive_index);
  if (!(pred.rd_dc > 0.0) || !(pred.rd_ac > 0.0))
    fail(ErrorKind::numerical, "reference model reflectance is not positive");

  const double floor_dc = config.division_floor * region_max(ref.demod.m_dc, region);
  const double floor_ac = config.division_floor * region_max(ref.demod.m_ac, region);

  ReflectanceMap out{MapD(w, h), MapD(w, h), Mask(w, h), sample.fx};
  for (int y = region.y0; y < region.y1; ++y) {
    for (int x = region.x0; x < region.x1; ++x) {
      const double rdc = ref.demod.m_dc(y, x);
      const double rac = ref.demod.m_ac(y, x);
      const double sdc = sample.m_dc(y, x);
      const double sac = sample.m_ac(y, x);
      if (!(rdc > floor_dc && rac > floor_ac && rdc > 0.0 && rac > 0.0)) continue;
      const double dc = sdc / rdc * pred.rd_dc;
      const double ac = sac / rac * pred.rd_ac;
      if (!(dc > 0.0 && ac > 0.0) || !std::isfinite(dc) || !std::isfinite(ac)) continue;
      out.rd_dc(y, x) = dc;
      out.rd_ac(y, x) = ac;
      out.valid(y, x) = 1;
    }
  }
  return out;
}

PropertyMap property_map(const ReflectanceMap& rd, const DiffusionLut& lut, double wavelength_nm) {
  require(rd.fx == lut.fx(), "reflectance map fx does not match the LUT fx");
  require(rd.rd_dc.same_shape(rd.rd_ac) && rd.rd_dc.same_shape(rd.valid),
          "reflectance planes differ in shape");
  const int w = rd.rd_dc.width();
  const int h = rd.rd_dc.height();
  PropertyMap out{Grid2<float>(w, h), Grid2<float>(w, h), Mask(w, h, kMaskInvalid),
                  Provenance{{}, {rd.fx.per_mm()}, wavelength_nm, 0.0}};
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!rd.valid(y, x)) continue;
      const InversionResult r = lut.invert(rd.rd_dc(y, x), rd.rd_ac(y, x));
      out.mu_a(y, x) = static_cast<float>(r.props.mu_a);
      out.mu_s_prime(y, x) = static_cast<float>(r.props.mu_s_prime);
      out.mask(y, x) = r.out_of_range ? kMaskOutOfRange : kMaskValid;
    }
  });
  return out;
}

PropertyMap average_maps(std::span<const PropertyMap> maps) {
  require(!maps.empty(), "average_maps needs at least one map");
  const PropertyMap& first = maps.front();
  const int w = first.width();
  const int h = first.height();
  for (const PropertyMap& m : maps) {
    require(m.mu_a.same_shape(first.mu_a) && m.mu_s_prime.same_shape(first.mu_a) &&
                m.mask.same_shape(first.mu_a),
            "property maps differ in shape");
    require(m.provenance.wavelength_nm == first.provenance.wavelength_nm,
            "cannot average maps taken at different wavelengths");
  }

  PropertyMap out{Grid2<float>(w, h), Grid2<float>(w, h), Mask(w, h, kMaskInvalid), {}};
  out.provenance.wavelength_nm = first.provenance.wavelength_nm;
  out.provenance.sigma_px = first.provenance.sigma_px;
  for (const PropertyMap& m : maps) {
    const auto& p = m.provenance;
    out.provenance.references.insert(out.provenance.references.end(), p.references.begin(),
                                     p.references.end());
    out.provenance.fx_per_mm.insert(out.provenance.fx_per_mm.end(), p.fx_per_mm.begin(),
                                    p.fx_per_mm.end());
  }

  const double n = static_cast<double>(maps.size());
  for (std::size_t i = 0; i < out.mask.size(); ++i) {
    unsigned char flag = kMaskValid;
    double sa = 0.0, ss = 0.0;
    for (const PropertyMap& m : maps) {
      if (m.mask[i] == kMaskInvalid) {
        flag = kMaskInvalid;
        break;
      }
      if (m.mask[i] == kMaskOutOfRange) flag = kMaskOutOfRange;
      sa += m.mu_a[i];
      ss += m.mu_s_prime[i];
    }
    if (flag == kMaskInvalid) continue;
    out.mu_a[i] = static_cast<float>(sa / n);
    out.mu_s_prime[i] = static_cast<float>(ss / n);
    out.mask[i] = flag;
  }
  return out;
}

PropertyMap smooth_map(const PropertyMap& map, double sigma_px) {
  require(std::isfinite(sigma_px) && sigma_px >= 0.0, "smoothing sigma must be >= 0");
  PropertyMap out = map;
  out.provenance.sigma_px = sigma_px;
  if (sigma_px == 0.0 || map.mask.empty()) return out;

  const int w = map.width();
  const int h = map.height();
  MapD weight(w, h), va(w, h), vs(w, h);
  for (std::size_t i = 0; i < map.mask.size(); ++i) {
    if (map.mask[i] != kMaskValid) continue;
    weight[i] = 1.0;
    va[i] = map.mu_a[i];
    vs[i] = map.mu_s_prime[i];
  }
  const std::vector<double> kernel = gaussian_kernel(sigma_px);
  const MapD den = convolve_separable(weight, kernel);
  const MapD na = convolve_separable(va, kernel);
  const MapD ns = convolve_separable(vs, kernel);
  for (std::size_t i = 0; i < map.mask.size(); ++i) {
    if (map.mask[i] == kMaskInvalid) continue;
    if (den[i] <= 1e-12) continue;  // no valid neighbours; keep the raw value
    out.mu_a[i] = static_cast<float>(na[i] / den[i]);
    out.mu_s_prime[i] = static_cast<float>(ns[i] / den[i]);
  }
  return out;
}

std::vector<FrameStack> split_channels(const FrameStack& stack) {
  require(stack.channels() >= 2, "split_channels needs a multi-channel stack");
  std::vector<FrameStack> out;
  out.reserve(stack.channels());
  for (int c = 0; c < stack.channels(); ++c) {
    FrameStack s(stack.width(), stack.height(), stack.frames(), 1, stack.frame_rate(),
                 stack.bit_depth());
    auto& dst = s.raw();
    const auto& src = stack.raw();
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = src[i * static_cast<std::size_t>(stack.channels()) + c];
    out.push_back(std::move(s));
  }
  return out;
}

DemodulatedPair process_capture(const FrameStack& stack, const CaptureConfig& config,
                                std::optional<FrameTriplet>* triplet_out) {
  const FrameTriplet triplet = select_triplet(stack, config.tracker, config.channel);
  if (triplet_out) *triplet_out = triplet;
  return demodulate(stack, triplet, config.fx, config.channel);
}

ReferenceCapture make_reference(const FrameStack& stack, const CaptureConfig& config,
                                const OpticalProperties& props, std::string id) {
  props.validate();
  return {std::move(id), process_capture(stack, config), props};
}

PropertyMap recover_properties(std::span<const FrequencyData> data, const PipelineConfig& config) {
  require(!data.empty(), "no frequency data supplied");
  const int w = data.front().sample.m_dc.width();
  const int h = data.front().sample.m_dc.height();
  const AnalysisRegion region = config.region.value_or(AnalysisRegion::centered(w, h));

  std::vector<PropertyMap> maps;
  for (const FrequencyData& fd : data) {
    require(fd.lut != nullptr, "frequency data is missing its LUT");
    require(!fd.references.empty(), "frequency data has no reference captures");
    const double n = fd.lut->refractive_index();
    const ForwardModel forward = [n](const OpticalProperties& p, SpatialFrequency fx) {
      return reflectance_pair(p, fx, n);
    };
    for (const ReferenceCapture& ref : fd.references) {
      const ReflectanceMap rd =
          calibrate_reflectance(fd.sample, ref, region, config.calibration, forward);
      PropertyMap m = property_map(rd, *fd.lut, config.wavelength_nm);
      m.provenance.references = {ref.id};
      maps.push_back(std::move(m));
    }
  }
  PropertyMap out = smooth_map(average_maps(maps), config.sigma_px);
  if (std::none_of(out.mask.values().begin(), out.mask.values().end(),
                   [](unsigned char m) { return m != kMaskInvalid; }))
    fail(ErrorKind::numerical, "no pixel survived calibration");
  return out;
}

std::vector<ChannelOutcome> run_dual_wavelength(const FrameStack& stack,
                                                std::span<const ChannelSetup> channels,
                                                const PipelineConfig& config) {
  const std::vector<FrameStack> split = split_channels(stack);
  std::vector<std::future<ChannelOutcome>> jobs;
  for (const ChannelSetup& setup : channels) {
    jobs.push_back(std::async(std::launch::async, [&split, &setup, &config] {
      ChannelOutcome outcome{setup.name, std::nullopt, std::nullopt, {}};
      try {
        require(setup.capture.channel >= 0 &&
                    setup.capture.channel < static_cast<int>(split.size()),
                "channel index out of range for " + setup.name);
        CaptureConfig capture = setup.capture;
        capture.channel = 0;
        FrequencyData fd{process_capture(split[setup.capture.channel], capture),
                         setup.references, setup.lut};
        PipelineConfig cfg = config;
        cfg.wavelength_nm = setup.wavelength_nm;
        outcome.map = recover_properties(std::span(&fd, 1), cfg);
      } catch (const Error& e) {
        outcome.error = e.kind();
        outcome.message = e.what();
      }
      return outcome;
    }));
  }
  std::vector<ChannelOutcome> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

RegionStats region_stats(const PropertyMap& map, const AnalysisRegion& region, std::string name) {
  region.validate(map.width(), map.height());
  RegionStats s;
  s.name = std::move(name);
  double sa = 0, ss = 0, qa = 0, qs = 0;
  for (int y = region.y0; y < region.y1; ++y) {
    for (int x = region.x0; x < region.x1; ++x) {
      if (map.mask(y, x) == kMaskInvalid) continue;
      ++s.pixels;
      sa += map.mu_a(y, x);
      ss += map.mu_s_prime(y, x);
    }
  }
  if (s.pixels == 0) return s;
  const double n = static_cast<double>(s.pixels);
  s.mu_a_mean = sa / n;
  s.mu_s_mean = ss / n;
  for (int y = region.y0; y < region.y1; ++y) {
    for (int x = region.x0; x < region.x1; ++x) {
      if (map.mask(y, x) == kMaskInvalid) continue;
      qa += std::pow(map.mu_a(y, x) - s.mu_a_mean, 2);
      qs += std::pow(map.mu_s_prime(y, x) - s.mu_s_mean, 2);
    }
  }
  if (s.pixels > 1) {
    s.mu_a_std = std::sqrt(qa / (n - 1.0));
    s.mu_s_std = std::sqrt(qs / (n - 1.0));
  }
  return s;
}

}  // namespace sfdi
