#include <cmath>
#include <initializer_list>
#include <memory>
#include <random>
#include <sstream>

#include "doctest.h"
#include "sfdi/error.hpp"
#include "scenes.hpp"
#include "sfdi/binary_io.hpp"
#include "sfdi/filters.hpp"
#include "sfdi/pipeline.hpp"

using namespace sfdi;

namespace {

const OpticalProperties kRef{0.01, 0.75, 660.0};
const OpticalProperties kSample{0.012, 0.7, 660.0};

CaptureConfig capture_at(double fx) {
  CaptureConfig c;
  c.fx = SpatialFrequency{fx};
  return c;
}

std::shared_ptr<const DiffusionLut> lut_at(double fx) {
  LutSpec spec;
  spec.fx = SpatialFrequency{fx};
  return std::make_shared<const DiffusionLut>(build_lut(spec));
}

PropertyMap constant_map(int w, int h, float mu_a, float mu_s, std::string ref = "r") {
  return {Grid2<float>(w, h, mu_a), Grid2<float>(w, h, mu_s), Mask(w, h, kMaskValid),
          Provenance{{std::move(ref)}, {0.15}, 660.0, 0.0}};
}

PropertyMap random_map(int w, int h, std::uint64_t seed) {
  PropertyMap m = constant_map(w, h, 0.0f, 0.0f);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.5f, 1.5f);
  for (auto& v : m.mu_a.values()) v = 0.01f * u(rng);
  for (auto& v : m.mu_s_prime.values()) v = u(rng);
  return m;
}

double plane_mean(const Grid2<float>& g) {
  double s = 0.0;
  for (float v : g.values()) s += v;
  return s / static_cast<double>(g.size());
}

}  // namespace

TEST_CASE("analysis region") {
  const auto r = AnalysisRegion::centered(100, 50);
  CHECK(r.x1 - r.x0 == 60);
  CHECK(r.y1 - r.y0 == 30);
  CHECK(r.x0 == 20);
  CHECK(r.y0 == 10);
  CHECK(r.contains(10, 20));
  CHECK_FALSE(r.contains(40, 20));
  CHECK_THROWS_AS(AnalysisRegion({0, 0, 0, 5}).validate(10, 10), Error);
  CHECK_THROWS_AS(AnalysisRegion({0, 0, 11, 5}).validate(10, 10), Error);
}

TEST_CASE("calibrating a capture against itself returns the reference model") {
  auto s = test::drifting_scene(0.15, kRef);
  const auto ref = make_reference(render_fringe_video(s, 60, 4).stack, capture_at(0.15), kRef, "self");
  const auto region = AnalysisRegion::centered(s.width, s.height);
  const auto rd = calibrate_reflectance(ref.demod, ref, region);
  const auto pred = reflectance_pair(kRef, SpatialFrequency{0.15});
  int valid = 0;
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      if (!region.contains(y, x)) {
        CHECK(rd.valid(y, x) == 0);
        continue;
      }
      REQUIRE(rd.valid(y, x) == 1);
      ++valid;
      CHECK(std::fabs(rd.rd_dc(y, x) / pred.rd_dc - 1.0) <= 1e-12);
      CHECK(std::fabs(rd.rd_ac(y, x) / pred.rd_ac - 1.0) <= 1e-12);
    }
  CHECK(valid == (region.x1 - region.x0) * (region.y1 - region.y0));
}

TEST_CASE("calibration masks dead reference pixels and fx mismatches") {
  DemodulatedPair d{MapD(8, 8, 0.1), MapD(8, 8, 0.5), Mask(8, 8), SpatialFrequency{0.2}};
  ReferenceCapture ref{"r", d, kRef};
  ref.demod.m_ac(3, 4) = 0.0;
  ref.demod.m_dc(5, 5) = 0.0;
  const auto rd = calibrate_reflectance(d, ref, AnalysisRegion::full(8, 8));
  CHECK(rd.valid(3, 4) == 0);
  CHECK(rd.valid(5, 5) == 0);
  CHECK(rd.valid(0, 0) == 1);
  for (double v : rd.rd_dc.values()) CHECK(std::isfinite(v));

  DemodulatedPair other = d;
  other.fx = SpatialFrequency{0.3};
  CHECK_THROWS_AS(calibrate_reflectance(other, ref, AnalysisRegion::full(8, 8)), Error);
  CalibrationConfig high;
  high.division_floor = 0.5;
  ref.demod.m_dc(1, 1) = 0.2;  // below half the region maximum of 0.5
  CHECK(calibrate_reflectance(d, ref, AnalysisRegion::full(8, 8), high).valid(1, 1) == 0);
}

TEST_CASE("rendered sample calibrates to the forward model within 1%") {
  auto s = test::drifting_scene(0.15, kRef);
  const auto ref = make_reference(render_fringe_video(s, 80, 10).stack, capture_at(0.15), kRef, "r");
  s.sample = SampleField::homogeneous(s.width, s.height, kSample);
  const auto sample = process_capture(render_fringe_video(s, 80, 11).stack, capture_at(0.15));
  const auto rd = calibrate_reflectance(sample, ref, AnalysisRegion::centered(s.width, s.height));
  const auto pred = reflectance_pair(kSample, SpatialFrequency{0.15});
  std::vector<double> dc, ac;
  for (std::size_t i = 0; i < rd.valid.size(); ++i)
    if (rd.valid[i]) {
      dc.push_back(rd.rd_dc[i] / pred.rd_dc - 1.0);
      ac.push_back(rd.rd_ac[i] / pred.rd_ac - 1.0);
    }
  REQUIRE(!dc.empty());
  CHECK(std::fabs(test::median(dc)) < 0.01);
  CHECK(std::fabs(test::median(ac)) < 0.01);
}

TEST_CASE("property map of a homogeneous scene") {
  // Triplets at the edge of the phase tolerance leave a fringe-frequency ripple in the AC map;
  // picking the frames nearest 120/240 keeps it small.
  auto s = test::drifting_scene(0.15, kRef);
  auto capture = capture_at(0.15);
  capture.tracker.policy = SelectionPolicy::closest;
  const auto ref = make_reference(render_fringe_video(s, 80, 20).stack, capture, kRef, "r");
  s.sample = SampleField::homogeneous(s.width, s.height, {0.0123, 0.87, 660.0});
  const auto sample = process_capture(render_fringe_video(s, 80, 21).stack, capture);
  const auto region = AnalysisRegion::centered(s.width, s.height);
  const auto lut = lut_at(0.15);
  const auto map = property_map(calibrate_reflectance(sample, ref, region), *lut, 660.0);
  const auto v = test::valid_values(map);
  REQUIRE(v.mu_s.size() > 1000);
  CHECK(test::std_of(v.mu_s) < 0.05 * test::mean_of(v.mu_s));
  // one grid step: log grid ratio 100^(1/127), linear step 2.9/127
  CHECK(std::fabs(test::mean_of(v.mu_a) - 0.0123) < 0.0123 * (std::pow(100.0, 1.0 / 127) - 1));
  CHECK(std::fabs(test::mean_of(v.mu_s) - 0.87) < 2.9 / 127);
  CHECK(map.provenance.fx_per_mm == std::vector<double>{0.15});
  CHECK(map.provenance.wavelength_nm == 660.0);

  ReflectanceMap empty{MapD(6, 4), MapD(6, 4), Mask(6, 4, 0), SpatialFrequency{0.15}};
  const auto none = property_map(empty, *lut, 660.0);
  for (unsigned char m : none.mask.values()) CHECK(m == kMaskInvalid);
  empty.fx = SpatialFrequency{0.3};
  CHECK_THROWS_AS(property_map(empty, *lut, 660.0), Error);
}

TEST_CASE("out-of-range reflectance is flagged in the mask") {
  const auto lut = lut_at(0.2);
  ReflectanceMap rd{MapD(2, 1, 0.3), MapD(2, 1, 0.05), Mask(2, 1, 1), SpatialFrequency{0.2}};
  rd.rd_dc(0, 1) = 1.5;
  rd.rd_ac(0, 1) = 1.5;
  const auto m = property_map(rd, *lut, 660.0);
  CHECK(m.mask(0, 0) == kMaskValid);
  CHECK(m.mask(0, 1) == kMaskOutOfRange);
}

TEST_CASE("average_maps") {
  const auto a = constant_map(5, 4, 0.01f, 1.0f, "a");
  const auto b = constant_map(5, 4, 0.02f, 0.5f, "b");
  const std::vector<PropertyMap> one{a};
  CHECK(average_maps(one) == a);

  std::vector<PropertyMap> two{a, b};
  two[1].mask(2, 3) = kMaskInvalid;
  two[0].mask(1, 1) = kMaskOutOfRange;
  const auto avg = average_maps(two);
  CHECK(avg.mu_a(0, 0) == doctest::Approx(0.015));
  CHECK(avg.mu_s_prime(0, 0) == doctest::Approx(0.75));
  CHECK(avg.mask(2, 3) == kMaskInvalid);
  CHECK(avg.mask(1, 1) == kMaskOutOfRange);
  CHECK(avg.provenance.references == std::vector<std::string>{"a", "b"});
  CHECK(avg.provenance.fx_per_mm.size() == 2);

  two[1].provenance.wavelength_nm = 515.0;
  CHECK_THROWS_AS(average_maps(two), Error);
  const std::vector<PropertyMap> shapes{a, constant_map(4, 4, 0.01f, 1.0f)};
  CHECK_THROWS_AS(average_maps(shapes), Error);
  CHECK_THROWS_AS(average_maps({}), Error);
}

TEST_CASE("averaging independent noisy maps reduces variance") {
  std::vector<PropertyMap> maps;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) maps.push_back(random_map(40, 30, seed));
  const auto var = [](const PropertyMap& m) {
    const auto v = test::valid_values(m);
    return std::pow(test::std_of(v.mu_s), 2);
  };
  const auto avg = average_maps(maps);
  for (const auto& m : maps) CHECK(var(avg) < var(m));
  CHECK(var(avg) == doctest::Approx(var(maps[0]) / 4).epsilon(0.15));
}

TEST_CASE("smooth_map") {
  const auto c = constant_map(30, 20, 0.01f, 0.8f);
  const auto same = smooth_map(c, 0.0);
  CHECK(same.mu_a == c.mu_a);
  CHECK(same.mu_s_prime == c.mu_s_prime);
  const auto smoothed = smooth_map(c, 5.0);
  for (float v : smoothed.mu_s_prime.values()) CHECK(v == doctest::Approx(0.8f).epsilon(1e-6));
  CHECK(smoothed.provenance.sigma_px == 5.0);
  CHECK_THROWS_AS(smooth_map(c, -1.0), Error);

  // impulse -> sampled Gaussian kernel
  auto imp = constant_map(61, 61, 0.0f, 0.0f);
  imp.mu_s_prime(30, 30) = 1.0f;
  const auto out = smooth_map(imp, 5.0);
  const auto k = gaussian_kernel(5.0);
  const int r = static_cast<int>(k.size() / 2);
  double sum = 0.0;
  for (int y = 0; y < 61; ++y)
    for (int x = 0; x < 61; ++x) {
      sum += out.mu_s_prime(y, x);
      if (std::abs(y - 30) <= r && std::abs(x - 30) <= r)
        CHECK(out.mu_s_prime(y, x) == doctest::Approx(k[y - 30 + r] * k[x - 30 + r]).epsilon(1e-5));
    }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));

  const auto noisy = random_map(50, 40, 3);
  const auto sm = smooth_map(noisy, 5.0);
  CHECK(std::fabs(plane_mean(sm.mu_s_prime) / plane_mean(noisy.mu_s_prime) - 1.0) < 1e-6);
  CHECK(std::fabs(plane_mean(sm.mu_a) / plane_mean(noisy.mu_a) - 1.0) < 1e-6);
}

TEST_CASE("smoothing ignores invalid pixels") {
  auto m = constant_map(21, 21, 0.01f, 1.0f);
  m.mu_s_prime(10, 10) = 100.0f;
  m.mask(10, 10) = kMaskInvalid;
  m.mu_s_prime(3, 3) = 50.0f;
  m.mask(3, 3) = kMaskOutOfRange;
  const auto out = smooth_map(m, 2.0);
  for (int y = 0; y < 21; ++y)
    for (int x = 0; x < 21; ++x)
      if (!(y == 10 && x == 10) && !(y == 3 && x == 3))
        CHECK(out.mu_s_prime(y, x) == doctest::Approx(1.0f).epsilon(1e-6));
  CHECK(out.mu_s_prime(10, 10) == 100.0f);
  CHECK(out.mask(3, 3) == kMaskOutOfRange);
}

TEST_CASE("split_channels") {
  FrameStack rgb(6, 5, 3, 3, 25.0, 12);
  for (int t = 0; t < 3; ++t)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 6; ++x) {
        rgb.at(t, y, x, 0) = 0.1f * t + 0.01f * x;
        rgb.at(t, y, x, 2) = 0.5f;
      }
  const auto parts = split_channels(rgb);
  REQUIRE(parts.size() == 3);
  for (float v : parts[1].raw()) CHECK(v == 0.0f);
  CHECK(parts[0].at(2, 4, 5) == rgb.at(2, 4, 5, 0));
  CHECK(parts[2].frame_rate() == 25.0);
  CHECK(parts[2].bit_depth() == 12);
  CHECK(combine_channels(parts, 3) == rgb);
  CHECK_THROWS_AS(split_channels(parts[0]), Error);
}

TEST_CASE("dual-wavelength scene splits into per-channel fringe frequencies") {
  auto red = test::drifting_scene(0.15, kSample);
  auto green = test::drifting_scene(0.2, {0.02, 0.9, 515.0});
  const std::vector<FrameStack> both{render_fringe_video(red, 40, 1).stack,
                                     render_fringe_video(green, 40, 2).stack};
  const auto parts = split_channels(combine_channels(both, 3));
  CHECK(track_frames(parts[0]).period_px == doctest::Approx(1.0 / (0.15 * 0.35)).epsilon(0.03));
  CHECK(track_frames(parts[1]).period_px == doctest::Approx(1.0 / (0.2 * 0.35)).epsilon(0.03));
}

TEST_CASE("dual run with the green laser off") {
  auto red = test::drifting_scene(0.15, kRef);
  const auto ref_stack = render_fringe_video(red, 80, 30).stack;
  red.sample = SampleField::homogeneous(red.width, red.height, kSample);
  FrameStack flat(red.width, red.height, 80, 1);
  for (auto& v : flat.raw()) v = 0.2f;
  const std::vector<FrameStack> parts{render_fringe_video(red, 80, 31).stack, flat};
  const auto stack = combine_channels(parts, 3);

  ChannelSetup r{"red", capture_at(0.15), 660.0, lut_at(0.15),
                 {make_reference(ref_stack, capture_at(0.15), kRef, "r")}};
  ChannelSetup g{"green", capture_at(0.2), 515.0, lut_at(0.2), {}};
  g.capture.channel = 1;
  g.references.push_back(r.references.front());  // never reached: tracking fails first
  g.references.back().demod.fx = SpatialFrequency{0.2};
  const std::vector<ChannelSetup> setups{r, g};
  const auto out = run_dual_wavelength(stack, setups, {});
  REQUIRE(out.size() == 2);
  CHECK(out[0].ok());
  CHECK(out[0].name == "red");
  CHECK_FALSE(out[1].ok());
  REQUIRE(out[1].error.has_value());
  CHECK(*out[1].error == ErrorKind::no_triplet);
  CHECK(!out[1].message.empty());
  const auto v = test::valid_values(*out[0].map);
  CHECK(test::median(v.mu_a) == doctest::Approx(0.012).epsilon(0.05));
  CHECK(test::median(v.mu_s) == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("region statistics") {
  auto m = constant_map(10, 10, 0.01f, 1.0f);
  for (int x = 0; x < 10; ++x) {
    m.mu_a(9, x) = 0.03f;
    m.mask(0, x) = kMaskInvalid;
  }
  const auto st = region_stats(m, {0, 5, 10, 10}, "bottom");
  CHECK(st.pixels == 50);
  CHECK(st.mu_a_mean == doctest::Approx(0.014).epsilon(1e-6));
  CHECK(st.mu_s_std == doctest::Approx(0.0));
  CHECK(region_stats(m, {0, 0, 10, 1}, "top").pixels == 0);
  std::ostringstream csv;
  const std::vector<RegionStats> rows{st};
  write_region_stats_csv(csv, rows);
  CHECK(csv.str().rfind("region,pixels,mu_a_mean,mu_a_std,mu_s_prime_mean,mu_s_prime_std\nbottom,50,", 0) == 0);
}

TEST_CASE("SFPM codec") {
  auto m = random_map(7, 5, 9);
  m.mask(1, 2) = kMaskInvalid;
  m.mask(3, 3) = kMaskOutOfRange;
  m.provenance = {{"phantom_a", "phantom_b"}, {0.15, 0.3}, 660.0, 5.0};
  const auto bytes = encode_property_map(m);
  CHECK(std::string(bytes.data(), 4) == "SFPM");
  const auto back = decode_property_map(bytes);
  CHECK(back == m);
  CHECK(encode_property_map(back) == bytes);

  const std::size_t planes = 4 + 2 + 4 + 4 + 35 * 4 * 2 + 35;
  const std::vector<char> no_footer(bytes.begin(), bytes.begin() + planes - 3);
  try {
    decode_property_map(no_footer);
    FAIL("truncated map decoded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
  auto bad_footer = bytes;
  bad_footer.back() = '#';
  try {
    decode_property_map(bad_footer);
    FAIL("corrupt footer decoded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find(std::to_string(planes)) != std::string::npos);
  }

  const auto dir = test::scratch_dir("sfpm");
  write_property_map(dir / "m.sfpm", m);
  CHECK(read_property_map(dir / "m.sfpm") == m);
}

TEST_CASE("PNG export") {
  const auto m = random_map(16, 9, 2);
  const auto dir = test::scratch_dir("png");
  write_map_png(dir / "mu_s.png", m.mu_s_prime, m.mask, 0.0, 2.0);
  const auto bytes = io::read_file(dir / "mu_s.png");
  REQUIRE(bytes.size() > 8);
  CHECK(std::string(bytes.data() + 1, 3) == "PNG");
  CHECK_THROWS_AS(write_map_png(dir / "bad.png", m.mu_s_prime, m.mask, 1.0, 1.0), Error);
}
