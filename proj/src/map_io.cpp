#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <json.hpp>

#include "sfdi/binary_io.hpp"
#include "sfdi/pipeline.hpp"

namespace sfdi {
namespace {

constexpr char kMagic[] = "SFPM";
constexpr std::uint16_t kVersion = 1;

// Viridis, sampled at nine evenly spaced stops.
constexpr std::array<std::array<double, 3>, 9> kColormap{{
    {68, 1, 84},
    {71, 44, 122},
    {59, 81, 139},
    {44, 113, 142},
    {33, 144, 141},
    {39, 173, 129},
    {92, 200, 99},
    {170, 220, 50},
    {253, 231, 37},
}};

std::array<unsigned char, 3> colour(double t) {
  t = std::clamp(t, 0.0, 1.0) * (kColormap.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(t), kColormap.size() - 2);
  const double f = t - static_cast<double>(i);
  std::array<unsigned char, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<unsigned char>(
        std::lround(kColormap[i][c] * (1.0 - f) + kColormap[i + 1][c] * f));
  return rgb;
}

void png_append(png_structp png, png_bytep data, png_size_t len) {
  auto* buf = static_cast<std::vector<char>*>(png_get_io_ptr(png));
  buf->insert(buf->end(), reinterpret_cast<char*>(data), reinterpret_cast<char*>(data) + len);
}

}  // namespace

std::vector<char> encode_property_map(const PropertyMap& map) {
  require(map.mu_a.same_shape(map.mu_s_prime) && map.mu_a.same_shape(map.mask),
          "property map planes differ in shape");
  io::ByteWriter out;
  out.bytes(std::string_view(kMagic, 4));
  out.put<std::uint16_t>(kVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(map.width()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(map.height()));
  for (float v : map.mu_a.values()) out.put<float>(v);
  for (float v : map.mu_s_prime.values()) out.put<float>(v);
  for (unsigned char m : map.mask.values()) out.put<std::uint8_t>(m);
  const nlohmann::json footer{
      {"references", map.provenance.references},
      {"fx_per_mm", map.provenance.fx_per_mm},
      {"wavelength_nm", map.provenance.wavelength_nm},
      {"sigma_px", map.provenance.sigma_px},
  };
  out.bytes(footer.dump());
  return out.take();
}

PropertyMap decode_property_map(std::span<const char> bytes) {
  io::ByteReader in(bytes, "SFPM");
  in.expect_magic(std::string_view(kMagic, 4));
  const auto version = in.get<std::uint16_t>("version");
  if (version != kVersion) in.error("unsupported version " + std::to_string(version));
  const auto w = in.get<std::uint32_t>("width");
  const auto h = in.get<std::uint32_t>("height");
  if (w > (1u << 16) || h > (1u << 16)) in.error("implausible dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  in.need(n * 9, "map planes");

  PropertyMap map{Grid2<float>(static_cast<int>(w), static_cast<int>(h)),
                  Grid2<float>(static_cast<int>(w), static_cast<int>(h)),
                  Mask(static_cast<int>(w), static_cast<int>(h)), {}};
  for (auto& v : map.mu_a.values()) v = in.get<float>("mu_a");
  for (auto& v : map.mu_s_prime.values()) v = in.get<float>("mu_s_prime");
  for (auto& m : map.mask.values()) m = in.get<std::uint8_t>("mask");

  const std::size_t footer_at = in.offset();
  nlohmann::json footer;
  try {
    footer = nlohmann::json::parse(in.rest());
    map.provenance.references = footer.at("references").get<std::vector<std::string>>();
    map.provenance.fx_per_mm = footer.at("fx_per_mm").get<std::vector<double>>();
    map.provenance.wavelength_nm = footer.at("wavelength_nm").get<double>();
    map.provenance.sigma_px = footer.at("sigma_px").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, "SFPM: bad provenance footer at byte offset " +
                               std::to_string(footer_at) + ": " + e.what());
  }
  return map;
}

void write_property_map(const std::filesystem::path& path, const PropertyMap& map) {
  io::write_file_atomic(path, encode_property_map(map));
}

PropertyMap read_property_map(const std::filesystem::path& path) {
  return decode_property_map(io::read_file(path));
}

void write_map_png(const std::filesystem::path& path, const Grid2<float>& plane, const Mask& mask,
                   double lo, double hi) {
  require(plane.same_shape(mask), "plane and mask differ in shape");
  require(hi > lo, "colormap bounds must satisfy lo < hi");
  require(!plane.empty(), "cannot export an empty map");
  const int w = plane.width();
  const int h = plane.height();

  std::vector<png_byte> rgb(static_cast<std::size_t>(w) * h * 3, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask(y, x) == kMaskInvalid || !std::isfinite(plane(y, x))) continue;
      const auto c = colour((plane(y, x) - lo) / (hi - lo));
      std::copy(c.begin(), c.end(), rgb.begin() + (static_cast<std::size_t>(y) * w + x) * 3);
    }
  }

  std::vector<char> buf;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::numerical, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::numerical, "libpng failed encoding " + path.string());
  }
  png_set_write_fn(png, &buf, png_append, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) png_write_row(png, rgb.data() + static_cast<std::size_t>(y) * w * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  io::write_file_atomic(path, buf);
}

void write_region_stats_csv(std::ostream& out, std::span<const RegionStats> stats) {
  out << "region,pixels,mu_a_mean,mu_a_std,mu_s_prime_mean,mu_s_prime_std\n";
  out << std::setprecision(9);
  for (const RegionStats& s : stats)
    out << s.name << ',' << s.pixels << ',' << s.mu_a_mean << ',' << s.mu_a_std << ','
        << s.mu_s_mean << ',' << s.mu_s_std << '\n';
}

}  // namespace sfdi
