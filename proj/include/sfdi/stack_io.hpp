#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "sfdi/frame_stack.hpp"

namespace sfdi {

/// SFST codec. Pixels are stored as u8 (8-bit), u16 (12/16-bit) or f32 (32-bit).
std::vector<char> encode_stack(const FrameStack& stack);
FrameStack decode_stack(std::span<const char> bytes);
void write_stack(const std::filesystem::path& path, const FrameStack& stack);

/// One binary PGM (P5) or PPM (P6) image; returns a one-frame stack normalized by maxval.
FrameStack decode_pnm(std::span<const char> bytes, const std::string& what = "PNM");

/// An SFST file, or a directory of numerically ordered .pgm/.ppm frames. `frame_rate`
/// applies to directories, which carry no timing of their own.
FrameStack ingest(const std::filesystem::path& path, double frame_rate = kDefaultFrameRate);

}  // namespace sfdi
