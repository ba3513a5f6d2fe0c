#pragma once

#include "unifix/core.hpp"

#include <filesystem>
#include <vector>

namespace unifix {

/// [-1, 1] -> 8-bit, rounding to nearest and clamping.
std::uint8_t to_byte(float v);
float from_byte(std::uint8_t b);

/// Applies the 8-bit round trip without touching disk.
Image quantize(const Image& image);

/// 3-channel images only; values are clamped to [-1, 1] before quantization.
void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

} // namespace unifix
