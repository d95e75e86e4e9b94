#include <cmath>
#include <initializer_list>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "sfdi/error.hpp"
#include "scenes.hpp"
#include "sfdi/demod.hpp"
#include "sfdi/projector.hpp"

using namespace sfdi;

namespace {

FringeScene still_scene(double fx) {
  FringeScene s;
  s.width = 128;
  s.height = 32;
  s.pixel_mm = 0.35;
  s.fx = SpatialFrequency{fx};
  s.envelope.shape = EnvelopeShape::flat;
  s.drift = {0.0, 0.0};
  s.sample = SampleField::homogeneous(128, 32, {0.01, 0.75, 660.0});
  return s;
}

std::vector<double> row_mean(const ImageF& img) {
  std::vector<double> out(static_cast<std::size_t>(img.width()), 0.0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out[x] += img(y, x) / img.height();
  return out;
}

int spectral_peak(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  int best = 1;
  double best_mag = -1.0;
  for (int k = 1; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (int x = 0; x < n; ++x) acc += v[x] * std::polar(1.0, -2.0 * std::numbers::pi * k * x / n);
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("double-slit spatial frequency") {
  CHECK(spatial_frequency({10.0, 660.0, 50.0}).per_mm() == doctest::Approx(0.30303).epsilon(1e-4));
  CHECK(spatial_frequency({5.0, 660.0, 50.0}).per_mm() == doctest::Approx(0.151515).epsilon(1e-4));
  CHECK(spatial_frequency({5.0, 515.0, 50.0}).per_mm() == doctest::Approx(0.194175).epsilon(1e-4));
  CHECK(spatial_frequency({8.66, 660.0, 50.0}).per_mm() == doctest::Approx(0.262424).epsilon(1e-4));
  const double near = spatial_frequency({5.0, 660.0, 50.0}).per_mm();
  const double far = spatial_frequency({5.0, 660.0, 100.0}).per_mm();
  CHECK(far == doctest::Approx(near / 2).epsilon(1e-15));
  CHECK_THROWS_AS(spatial_frequency({0.0, 660.0, 50.0}), Error);
  CHECK_THROWS_AS(spatial_frequency({5.0, 660.0, -1.0}), Error);
}

TEST_CASE("fx * lambda * WD / d is one") {
  for (double d : {1.0, 5.0, 8.66, 10.0, 37.5})
    for (double lambda : {405.0, 515.0, 635.0, 660.0, 980.0})
      for (double wd : {5.0, 20.0, 50.0, 120.0}) {
        const double fx = spatial_frequency({d, lambda, wd}).per_mm();
        CHECK(fx * (lambda * 1e-6) * wd / (d * 1e-3) == doctest::Approx(1.0).epsilon(1e-15));
      }
}

TEST_CASE("still scene renders identical pure sinusoids") {
  const auto s = still_scene(0.3);
  const auto v = render_fringe_video(s, 4, 9);
  for (int t = 1; t < 4; ++t) CHECK(v.stack.frame(t) == v.stack.frame(0));
  const auto rd = reflectance_pair({0.01, 0.75, 660.0}, s.fx);
  const double k = 2.0 * std::numbers::pi * 0.3 * 0.35;
  for (int x = 0; x < 128; ++x) {
    const double want = rd.rd_dc + 0.9 * rd.rd_ac * std::cos(k * x);
    CHECK(v.stack.at(0, 5, x) == doctest::Approx(want).epsilon(1e-6));
  }
  // 0.3/mm * 0.35 mm * 128 px = 13.44 cycles across the frame
  CHECK(std::abs(spectral_peak(row_mean(v.stack.frame(0))) - 13) <= 1);
}

TEST_CASE("three rendered frames at 0/120/240 demodulate to envelope * Rd") {
  auto s = still_scene(0.1);
  s.envelope = {EnvelopeShape::gaussian, 60.0, 14.0, 50.0, 30.0, 0.8};
  s.drift.linear_deg_per_frame = 120.0;
  s.phase0_deg = 33.0;
  const auto v = render_fringe_video(s, 3, 1);
  const auto d = demodulate(v.stack, {{0, 1, 2}, {0, 120, 240}}, s.fx);
  const auto rd = reflectance_pair({0.01, 0.75, 660.0}, s.fx);
  double worst_ac = 0.0, worst_dc = 0.0;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const double dx = (x - 60.0) / 50.0, dy = (y - 14.0) / 30.0;
      const double env = 0.8 * std::exp(-0.5 * (dx * dx + dy * dy));
      worst_dc = std::max(worst_dc, std::fabs(d.m_dc(y, x) / (env * rd.rd_dc) - 1.0));
      worst_ac = std::max(worst_ac, std::fabs(d.m_ac(y, x) / (0.9 * env * rd.rd_ac) - 1.0));
    }
  CHECK(worst_dc < 1e-6);
  CHECK(worst_ac < 1e-6);
}

TEST_CASE("renderer ground truth and determinism") {
  auto s = test::drifting_scene(0.3, {0.01, 0.75, 660.0});
  s.noise_std = 0.01;
  s.speckle_contrast = 0.1;
  const auto a = render_fringe_video(s, 12, 77);
  const auto b = render_fringe_video(s, 12, 77);
  const auto c = render_fringe_video(s, 12, 78);
  CHECK(a.stack == b.stack);
  CHECK(a.phase_deg == b.phase_deg);
  CHECK_FALSE(a.stack == c.stack);
  CHECK(a.phase_deg[0] == 0.0);
  for (std::size_t t = 1; t < a.phase_deg.size(); ++t) {
    CHECK(a.phase_deg[t] >= 0.0);
    CHECK(a.phase_deg[t] < 360.0);
  }
  for (float v : a.stack.raw()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("12-bit quantization") {
  auto s = still_scene(0.2);
  s.quantize_12bit = true;
  const auto v = render_fringe_video(s, 1, 3);
  CHECK(v.stack.bit_depth() == 12);
  for (float x : v.stack.raw()) {
    const double q = x * 4095.0;
    CHECK(std::fabs(q - std::round(q)) < 1e-3);
  }
}

TEST_CASE("full dropout leaves no usable frame") {
  auto s = test::drifting_scene(0.3, {0.01, 0.75, 660.0});
  s.dropout = {1.0, 1.0};
  const auto v = render_fringe_video(s, 20, 4);
  for (double c : v.contrast) CHECK(c == 0.0);
  const auto tracking = track_frames(v.stack);
  for (const auto& f : tracking.frames) CHECK_FALSE(f.usable);
  CHECK(usable_frame_rate(v.stack).frames_per_second == 0.0);
  CHECK_THROWS_AS(select_triplet(v.stack), NoTripletFound);
}

TEST_CASE("speckle field is unit mean and frequency specific") {
  const auto a = speckle_field(64, 64, 0.2, 1.5, 11, SpatialFrequency{0.15});
  const auto b = speckle_field(64, 64, 0.2, 1.5, 11, SpatialFrequency{0.15});
  const auto c = speckle_field(64, 64, 0.2, 1.5, 11, SpatialFrequency{0.3});
  CHECK(a == b);
  CHECK_FALSE(a == c);
  double mean = 0.0, sq = 0.0;
  for (float v : a.values()) mean += v;
  mean /= a.size();
  for (float v : a.values()) sq += (v - mean) * (v - mean);
  CHECK(mean == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(std::sqrt(sq / a.size()) == doctest::Approx(0.2).epsilon(0.02));
  const auto none = speckle_field(8, 8, 0.0, 1.5, 1, SpatialFrequency{0.1});
  for (float v : none.values()) CHECK(v == 1.0f);
}

TEST_CASE("envelope profile") {
  FrameStack flat(16, 8, 3, 1);
  for (auto& v : flat.raw()) v = 0.25f;
  for (double p : envelope_profile(flat, {3, -1})) CHECK(p == doctest::Approx(0.25));
  CHECK_THROWS_AS(envelope_profile(FrameStack(16, 8, 0, 1)), Error);

  // Ten frames stepping 36 deg cancel the fringe exactly, leaving the envelope.
  auto s = still_scene(0.3);
  s.envelope = {EnvelopeShape::gaussian, 70.0, -1.0, 30.0, 30.0, 1.0};
  s.drift.linear_deg_per_frame = 36.0;
  const auto base = envelope_profile(render_fringe_video(s, 10, 2).stack);
  s.envelope.gain = 1.1;
  const auto brighter = envelope_profile(render_fringe_video(s, 10, 2).stack);
  const auto argmax = [](const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  };
  CHECK(std::abs(argmax(base) - 70) <= 1);
  CHECK(argmax(base) == argmax(brighter));
  for (std::size_t x = 0; x < base.size(); ++x) {
    CHECK(brighter[x] / base[x] == doctest::Approx(1.1).epsilon(1e-5));
  }
}

TEST_CASE("combine_channels interleaves") {
  FrameStack a(4, 3, 2, 1), b(4, 3, 2, 1);
  for (auto& v : a.raw()) v = 0.5f;
  for (auto& v : b.raw()) v = 0.25f;
  const std::vector<FrameStack> parts{a, b};
  const auto rgb = combine_channels(parts, 3);
  CHECK(rgb.channels() == 3);
  CHECK(rgb.at(1, 2, 3, 0) == 0.5f);
  CHECK(rgb.at(1, 2, 3, 1) == 0.25f);
  CHECK(rgb.at(1, 2, 3, 2) == 0.0f);
}
