#pragma once

#include <filesystem>

#include "ssdda/types.hpp"

namespace ssdda {

// Binary 8-bit netpbm rasters: P6 (PPM) for images, P5 (PGM) for label maps.
// Images are quantized with round(v * 255) on write and mapped back with
// byte / 255 on read, so a file re-written after reading is byte-identical.

void write_ppm(const std::filesystem::path& path, const SegImage& image);
SegImage read_ppm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);

} // namespace ssdda
