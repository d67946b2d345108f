#pragma once

#include <filesystem>

#include "ssdda/params.hpp"

namespace ssdda {

// Bit-exact parameter container. Layout:
//   magic "SSDA\x01"
//   u32 entry count (little-endian)
//   per entry: u16 name length, name bytes, u8 rank, rank x u32 dims,
//              values as little-endian IEEE-754 binary32, row-major
//   u32 CRC32 (zlib polynomial) of everything between magic and this field
// Values are stored in single precision; save -> load -> save is
// byte-identical because the widening to double is exact.

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

} // namespace ssdda
