#include <cmath>
#include <initializer_list>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "sfdi/error.hpp"
#include "sfdi/lut.hpp"

using namespace sfdi;

namespace {

const DiffusionLut& default_lut() {
  static const DiffusionLut lut = build_lut(LutSpec{});
  return lut;
}

// Exhaustive nearest node in (Rd_DC, Rd_AC), strict '<' keeps the first (lowest index) on ties.
std::pair<int, int> brute_nearest(const DiffusionLut& lut, double dc, double ac) {
  const int na = static_cast<int>(lut.mu_a_grid().size());
  const int ns = static_cast<int>(lut.mu_s_grid().size());
  double best = std::numeric_limits<double>::infinity();
  std::pair<int, int> arg{0, 0};
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < ns; ++j) {
      const auto& node = lut.at(i, j);
      const double d = (node.rd_dc - dc) * (node.rd_dc - dc) + (node.rd_ac - ac) * (node.rd_ac - ac);
      if (d < best) {
        best = d;
        arg = {i, j};
      }
    }
  return arg;
}

// Width of the grid cells touching `value`.
double local_step(std::span<const double> grid, double value) {
  std::size_t i = 1;
  while (i + 1 < grid.size() && grid[i] < value) ++i;
  double step = grid[i] - grid[i - 1];
  if (i + 1 < grid.size()) step = std::max(step, grid[i + 1] - grid[i]);
  return step;
}

InversionResult round_trip(const DiffusionLut& lut, const OpticalProperties& p) {
  return invert_lut(lut, reflectance_pair(p, lut.fx(), lut.refractive_index()));
}

}  // namespace

TEST_CASE("grid construction") {
  const auto lin = make_grid({0.1, 3.0}, 30, GridSpacing::linear);
  CHECK(lin.size() == 30);
  CHECK(lin.front() == 0.1);
  CHECK(lin.back() == 3.0);
  CHECK(lin[1] - lin[0] == doctest::Approx(0.1));
  const auto lg = make_grid({0.001, 0.1}, 3, GridSpacing::logarithmic);
  CHECK(lg[1] == doctest::Approx(0.01));
  CHECK_THROWS_AS(make_grid({0.1, 3.0}, 1, GridSpacing::linear), Error);
  CHECK_THROWS_AS(make_grid({0.3, 0.1}, 8, GridSpacing::linear), Error);
  CHECK_THROWS_AS(make_grid({0.0, 0.1}, 8, GridSpacing::logarithmic), Error);
}

TEST_CASE("build_lut structural postcondition") {
  LutSpec spec;
  spec.fx = SpatialFrequency{0.2};
  spec.mu_a = {0.001, 0.05};
  spec.mu_s_prime = {0.3, 2.0};
  const auto lut = build_lut(spec);
  CHECK(lut.table().size() == 16384);
  CHECK_FALSE(lut.diffusion_warning());
  for (const auto& node : lut.table()) CHECK(node.rd_ac <= node.rd_dc);
  for (int j = 0; j < 128; ++j)
    for (int i = 1; i < 128; ++i) CHECK(lut.at(i, j).rd_dc < lut.at(i - 1, j).rd_dc);
  const auto grid_a = lut.mu_a_grid();
  const auto grid_s = lut.mu_s_grid();
  for (int i : {0, 17, 127})
    for (int j : {0, 64, 127}) {
      const auto pair = reflectance_pair({grid_a[i], grid_s[j], 660.0}, spec.fx, 1.4);
      CHECK(lut.at(i, j).rd_dc == pair.rd_dc);
      CHECK(lut.at(i, j).rd_ac == pair.rd_ac);
    }
}

TEST_CASE("degenerate grids are rejected") {
  LutSpec spec;
  spec.n_mu_a = 1;
  CHECK_THROWS_AS(build_lut(spec), Error);
  spec = {};
  spec.n_mu_s = 1;
  CHECK_THROWS_AS(build_lut(spec), Error);
}

TEST_CASE("default grid overlaps the diffusion-invalid corner") {
  CHECK(default_lut().diffusion_warning());
}

TEST_CASE("constructor enforces table invariants") {
  std::vector<double> a{0.01, 0.02}, s{0.5, 1.0};
  std::vector<ReflectanceNode> ok(4, {0.5, 0.1});
  CHECK_NOTHROW(DiffusionLut(SpatialFrequency{0.1}, 1.4, a, s, ok));
  CHECK_THROWS_AS(DiffusionLut(SpatialFrequency{0.1}, 1.4, a, s, std::vector<ReflectanceNode>(3)),
                  Error);
  std::vector<ReflectanceNode> bad(4, {0.1, 0.5});
  CHECK_THROWS_AS(DiffusionLut(SpatialFrequency{0.1}, 1.4, a, s, bad), Error);
  CHECK_THROWS_AS(DiffusionLut(SpatialFrequency{0.1}, 1.4, {0.02, 0.01}, s, ok), Error);
}

TEST_CASE("inversion at grid nodes is exact") {
  const auto& lut = default_lut();
  const auto ga = lut.mu_a_grid();
  const auto gs = lut.mu_s_grid();
  for (int i : {0, 1, 40, 90, 126, 127})
    for (int j : {0, 2, 63, 127}) {
      const auto& node = lut.at(i, j);
      const auto r = invert_lut(lut, {node.rd_dc, node.rd_ac, lut.fx()});
      CHECK(r.props.mu_a == doctest::Approx(ga[i]).epsilon(1e-9));
      CHECK(r.props.mu_s_prime == doctest::Approx(gs[j]).epsilon(1e-9));
      CHECK_FALSE(r.out_of_range);
    }
}

TEST_CASE("off-grid inversion within one grid step of truth") {
  const auto& lut = default_lut();
  const OpticalProperties p{0.0123, 0.87, 660.0};
  const auto r = round_trip(lut, p);
  CHECK_FALSE(r.out_of_range);
  CHECK(std::fabs(r.props.mu_a - p.mu_a) <= local_step(lut.mu_a_grid(), p.mu_a));
  CHECK(std::fabs(r.props.mu_s_prime - p.mu_s_prime) <= local_step(lut.mu_s_grid(), p.mu_s_prime));
  // Brute-force oracle: the nearest node itself is within one step.
  const auto pair = reflectance_pair(p, lut.fx());
  const auto [bi, bj] = brute_nearest(lut, pair.rd_dc, pair.rd_ac);
  CHECK(std::fabs(lut.mu_a_grid()[bi] - p.mu_a) <= local_step(lut.mu_a_grid(), p.mu_a));
  CHECK(std::fabs(lut.mu_s_grid()[bj] - p.mu_s_prime) <= local_step(lut.mu_s_grid(), p.mu_s_prime));
  // Bilinear refinement does much better than one step on a smooth table.
  CHECK(r.props.mu_a == doctest::Approx(p.mu_a).epsilon(1e-3));
  CHECK(r.props.mu_s_prime == doctest::Approx(p.mu_s_prime).epsilon(1e-3));
}

TEST_CASE("nonphysical reflectance is clamped and flagged") {
  const auto& lut = default_lut();
  const auto r = invert_lut(lut, {1.5, 1.5, lut.fx()});
  CHECK(r.out_of_range);
  CHECK(r.props.mu_a >= lut.mu_a_grid().front());
  CHECK(r.props.mu_a <= lut.mu_a_grid().back());
  CHECK(r.props.mu_s_prime >= lut.mu_s_grid().front());
  CHECK(r.props.mu_s_prime <= lut.mu_s_grid().back());
  CHECK_THROWS_AS(invert_lut(lut, {0.5, 0.1, SpatialFrequency{0.3}}), Error);
  CHECK_THROWS_AS(invert_lut(lut, {NAN, 0.1, lut.fx()}), Error);
}

TEST_CASE("round trip on a 16x16 probe lattice") {
  const auto& lut = default_lut();
  int worst_flags = 0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      const double mu_a = 0.001 * std::pow(100.0, (i + 0.5) / 16.0);
      const double mu_s = 0.1 + 2.9 * (j + 0.5) / 16.0;
      const auto r = round_trip(lut, {mu_a, mu_s, 660.0});
      worst_flags += r.out_of_range;
      CHECK(std::fabs(r.props.mu_a - mu_a) <= local_step(lut.mu_a_grid(), mu_a));
      CHECK(std::fabs(r.props.mu_s_prime - mu_s) <= local_step(lut.mu_s_grid(), mu_s));
    }
  CHECK(worst_flags == 0);
}

TEST_CASE("nearest-node search agrees with brute force") {
  const auto& lut = default_lut();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int q = 0; q < 1000; ++q) {
    const double mu_a = 0.001 * std::pow(100.0, u(rng));
    const double mu_s = 0.1 + 2.9 * u(rng);
    const auto pair = reflectance_pair({mu_a, mu_s, 660.0}, lut.fx());
    const auto brute = brute_nearest(lut, pair.rd_dc, pair.rd_ac);
    CHECK(lut.nearest_node(pair.rd_dc, pair.rd_ac) == brute);
    // Reflectance space is strongly anisotropic at low mu_s', so the nearest node can sit
    // several parameter steps away; the refined answer must still land next to the truth.
    const auto r = invert_lut(lut, pair);
    CHECK_FALSE(r.out_of_range);
    CHECK(std::fabs(r.props.mu_a - mu_a) <= local_step(lut.mu_a_grid(), mu_a));
    CHECK(std::fabs(r.props.mu_s_prime - mu_s) <= local_step(lut.mu_s_grid(), mu_s));
  }
}

TEST_CASE("nearest-node ties go to the lower indices") {
  std::vector<ReflectanceNode> table{{0.5, 0.1}, {0.5, 0.1}, {0.5, 0.1}, {0.5, 0.1}};
  const DiffusionLut lut(SpatialFrequency{0.1}, 1.4, {0.01, 0.02}, {0.5, 1.0}, table);
  CHECK(lut.nearest_node(0.5, 0.1) == std::pair{0, 0});
}

TEST_CASE("SFLU codec round trip and errors") {
  LutSpec spec;
  spec.n_mu_a = 9;
  spec.n_mu_s = 7;
  spec.fx = SpatialFrequency{0.15};
  const auto lut = build_lut(spec);
  const auto bytes = encode_lut(lut);
  CHECK(std::string(bytes.data(), 4) == "SFLU");
  // magic, version, fx, n, two lengths, grids, table
  CHECK(bytes.size() == 4 + 2 + 8 + 8 + 4 + 4 + 8 * (9 + 7) + 16 * 63);
  const auto back = decode_lut(bytes);
  CHECK(back == lut);
  CHECK(encode_lut(back) == bytes);

  const std::vector<char> cut(bytes.begin(), bytes.end() - 5);
  try {
    decode_lut(cut);
    FAIL("truncated LUT decoded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_lut(bad), Error);
}

TEST_CASE("LUT CSV dump") {
  LutSpec spec;
  spec.n_mu_a = 2;
  spec.n_mu_s = 3;
  std::ostringstream out;
  write_lut_csv(out, build_lut(spec));
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "mu_a,mu_s_prime,rd_dc,rd_ac");
  int rows = 0;
  while (std::getline(in, line)) rows += !line.empty();
  CHECK(rows == 6);
}
