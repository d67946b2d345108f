#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ssdda {

// Flat "key = value" configuration text. '#' starts a comment, blank lines
// are skipped, dotted keys express nesting (mix.variant = complexmix).
// Values are kept verbatim (trimmed), so parse -> serialize -> parse is a
// fixed point; typed accessors convert on demand.
class KvConfig {
public:
    KvConfig() = default;

    static KvConfig parse(const std::string& text);
    static KvConfig load(const std::filesystem::path& path);

    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

    bool has(const std::string& key) const;
    const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

    // Inserts or overwrites, preserving first-insertion order.
    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    void set_int(const std::string& key, std::int64_t value);

    // Required accessors throw InvalidConfig when the key is missing or the
    // value does not parse; the defaulted forms fall back instead of throwing
    // on absence (but still reject malformed values).
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;

private:
    const std::string* find(const std::string& key) const;

    std::vector<std::pair<std::string, std::string>> items_;
};

// Shortest round-trip decimal rendering (std::to_chars); used everywhere a
// real value is written to text so outputs are reproducible bit-for-bit.
std::string format_double(double v);

} // namespace ssdda
