#include "sfdi/stack_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>

#include "sfdi/binary_io.hpp"

namespace sfdi {
namespace {

constexpr char kMagic[] = "SFST";
constexpr std::uint16_t kVersion = 1;

double full_scale(int bit_depth) {
  switch (bit_depth) {
    case 8: return 255.0;
    case 12: return 4095.0;
    case 16: return 65535.0;
    default: return 1.0;
  }
}

std::size_t sample_bytes(int bit_depth) { return bit_depth == 8 ? 1 : bit_depth == 32 ? 4 : 2; }

// Numeric stems sort by value ("frame2" before "frame10"); ties fall back to the name.
std::optional<unsigned long long> trailing_number(const std::string& stem) {
  std::size_t end = stem.size();
  while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  if (begin == end || end - begin > 18) return std::nullopt;
  return std::stoull(stem.substr(begin, end - begin));
}

}  // namespace

std::vector<char> encode_stack(const FrameStack& stack) {
  const int depth = stack.bit_depth();
  require(stack.channels() >= 1 && stack.channels() <= 255, "SFST supports 1-255 channels");
  io::ByteWriter out;
  out.bytes(std::string_view(kMagic, 4));
  out.put<std::uint16_t>(kVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.width()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.height()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(stack.frames()));
  out.put<std::uint8_t>(static_cast<std::uint8_t>(stack.channels()));
  out.put<std::uint8_t>(static_cast<std::uint8_t>(depth));
  out.put<float>(static_cast<float>(stack.frame_rate()));
  const double scale = full_scale(depth);
  for (float v : stack.raw()) {
    if (depth == 32) {
      out.put<float>(v);
      continue;
    }
    const double q = std::clamp(std::round(static_cast<double>(v) * scale), 0.0, scale);
    if (depth == 8) out.put<std::uint8_t>(static_cast<std::uint8_t>(q));
    else out.put<std::uint16_t>(static_cast<std::uint16_t>(q));
  }
  return out.take();
}

FrameStack decode_stack(std::span<const char> bytes) {
  io::ByteReader in(bytes, "SFST");
  in.expect_magic(std::string_view(kMagic, 4));
  const auto version = in.get<std::uint16_t>("version");
  if (version != kVersion) in.error("unsupported version " + std::to_string(version));
  const auto w = in.get<std::uint32_t>("width");
  const auto h = in.get<std::uint32_t>("height");
  const auto n = in.get<std::uint32_t>("frame count");
  const auto c = in.get<std::uint8_t>("channel count");
  const auto depth = in.get<std::uint8_t>("bit depth");
  const auto fps = in.get<float>("frame rate");
  if (c == 0) in.error("channel count must be >= 1");
  if (depth != 8 && depth != 12 && depth != 16 && depth != 32)
    in.error("unsupported bit depth " + std::to_string(depth));
  if (!(std::isfinite(fps) && fps > 0.0f)) in.error("frame rate must be positive");
  const unsigned long long samples = static_cast<unsigned long long>(w) * h * n * c;
  const unsigned long long payload = samples * sample_bytes(depth);
  if (payload != in.remaining())
    in.error("payload is " + std::to_string(in.remaining()) + " bytes, header declares " +
             std::to_string(payload));

  FrameStack stack(static_cast<int>(w), static_cast<int>(h), static_cast<int>(n), c, fps, depth);
  const double scale = full_scale(depth);
  for (float& v : stack.raw()) {
    if (depth == 32) v = in.get<float>("pixel");
    else if (depth == 8) v = static_cast<float>(in.get<std::uint8_t>("pixel") / scale);
    else v = static_cast<float>(in.get<std::uint16_t>("pixel") / scale);
  }
  return stack;
}

void write_stack(const std::filesystem::path& path, const FrameStack& stack) {
  io::write_file_atomic(path, encode_stack(stack));
}

FrameStack decode_pnm(std::span<const char> bytes, const std::string& what) {
  io::ByteReader in(bytes, what);
  in.need(2, "magic");
  const char kind = bytes[1];
  if (bytes[0] != 'P' || (kind != '5' && kind != '6')) in.error("expected binary PGM (P5) or PPM (P6)");
  in.expect_magic(kind == '5' ? "P5" : "P6");

  auto next_int = [&](const char* field) {
    // Whitespace and '#' comments may separate header fields.
    for (;;) {
      in.need(1, field);
      const char ch = bytes[in.offset()];
      if (ch == '#') {
        while (in.remaining() > 0 && bytes[in.offset()] != '\n') in.get<char>(field);
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        in.get<char>(field);
      } else {
        break;
      }
    }
    long long value = 0;
    int digits = 0;
    while (in.remaining() > 0 && std::isdigit(static_cast<unsigned char>(bytes[in.offset()]))) {
      value = value * 10 + (in.get<char>(field) - '0');
      if (++digits > 9) in.error(std::string(field) + " is too large");
    }
    if (digits == 0) in.error(std::string("expected a number for ") + field);
    return value;
  };
  const long long w = next_int("width");
  const long long h = next_int("height");
  const long long maxval = next_int("maxval");
  if (w < 1 || h < 1) in.error("image dimensions must be positive");
  if (maxval < 1 || maxval > 65535) in.error("maxval must be in [1, 65535]");
  in.need(1, "header terminator");
  if (!std::isspace(static_cast<unsigned char>(bytes[in.offset()]))) in.error("malformed header");
  in.get<char>("header terminator");

  const int channels = kind == '5' ? 1 : 3;
  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t payload = static_cast<std::size_t>(w) * h * channels * bps;
  if (in.remaining() < payload)
    in.error("payload is " + std::to_string(in.remaining()) + " bytes, need " + std::to_string(payload));

  const int depth = maxval == 255 ? 8 : maxval == 4095 ? 12 : maxval == 65535 ? 16 : 32;
  FrameStack stack(static_cast<int>(w), static_cast<int>(h), 1, channels, kDefaultFrameRate, depth);
  const double scale = static_cast<double>(maxval);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + in.offset());
  for (std::size_t i = 0; i < stack.raw().size(); ++i) {
    // Multi-byte PNM samples are big-endian.
    const unsigned v = bps == 1 ? p[i] : (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1];
    stack.raw()[i] = static_cast<float>(std::min(1.0, v / scale));
  }
  return stack;
}

FrameStack ingest(const std::filesystem::path& path, double frame_rate) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) return decode_stack(io::read_file(path));

  struct Entry {
    std::optional<unsigned long long> number;
    fs::path path;
  };
  std::vector<Entry> frames;
  for (const auto& e : fs::directory_iterator(path)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".pgm" || ext == ".ppm") frames.push_back({trailing_number(e.path().stem().string()), e.path()});
  }
  if (frames.empty()) fail(ErrorKind::parse, "no .pgm/.ppm frames in " + path.string());
  std::sort(frames.begin(), frames.end(), [](const Entry& a, const Entry& b) {
    if (a.number && b.number && *a.number != *b.number) return *a.number < *b.number;
    if (a.number.has_value() != b.number.has_value()) return a.number.has_value();
    return a.path.filename() < b.path.filename();
  });

  std::vector<FrameStack> decoded;
  for (const Entry& e : frames) {
    decoded.push_back(decode_pnm(io::read_file(e.path), e.path.string()));
    const FrameStack& f = decoded.back();
    const FrameStack& first = decoded.front();
    if (f.width() != first.width() || f.height() != first.height() || f.channels() != first.channels() ||
        f.bit_depth() != first.bit_depth())
      fail(ErrorKind::parse, e.path.string() + ": frame is " + std::to_string(f.width()) + "x" +
                                 std::to_string(f.height()) + "x" + std::to_string(f.channels()) +
                                 ", expected " + std::to_string(first.width()) + "x" +
                                 std::to_string(first.height()) + "x" +
                                 std::to_string(first.channels()) + " like the first frame");
  }
  const FrameStack& first = decoded.front();
  FrameStack stack(first.width(), first.height(), static_cast<int>(decoded.size()), first.channels(),
                   frame_rate, first.bit_depth());
  const std::size_t per_frame = first.raw().size();
  for (std::size_t t = 0; t < decoded.size(); ++t)
    std::copy(decoded[t].raw().begin(), decoded[t].raw().end(), stack.raw().begin() + t * per_frame);
  return stack;
}

}  // namespace sfdi
