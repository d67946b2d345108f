#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ssdda/kvconfig.hpp"
#include "ssdda/model.hpp"
#include "ssdda/train.hpp"

namespace ssdda {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Reproducibility record written next to each checkpoint as
/// <checkpoint>.meta.txt: the effective config snapshot plus provenance.
struct RunManifest {
    KvConfig config;
    std::string dataset_checksum; // crc32 of manifest.txt bytes, hex
    std::string version;
    std::string started;  // ISO 8601 UTC
    std::string finished;
    std::uint64_t seed = 0;
};

void write_run_manifest(const std::filesystem::path& path, const RunManifest& rm);
RunManifest read_run_manifest(const std::filesystem::path& path);

/// CRC32 of a file's raw bytes, rendered as 8 hex digits.
std::string file_checksum(const std::filesystem::path& path);

/// Exclusive lock on an output directory: creating <dir>/.ssdda.lock fails
/// if it already exists; the destructor removes it.
class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::filesystem::path lock_path_;
};

/// Entry point behind main(): parses argv, dispatches to the subcommands,
/// and maps failures onto the exit codes above.
int run_cli(int argc, const char* const* argv);

} // namespace ssdda
