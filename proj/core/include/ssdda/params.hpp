#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssdda/errors.hpp"

namespace ssdda {

/// One named real-valued array with an explicit shape.
struct ParamEntry {
    std::string name;
    std::vector<std::uint32_t> shape;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

/// Ordered, uniquely named collection of real-valued arrays. Houses network
/// parameters, their gradients, and optimizer velocity buffers.
struct ParamSet {
    std::vector<ParamEntry> entries;

    /// Appends an entry; throws InvalidInput on duplicate names or when the
    /// value count does not match the shape.
    void add(std::string name, std::vector<std::uint32_t> shape, std::vector<double> values);

    /// Appends a zero-filled entry of the given shape.
    void add_zeros(std::string name, std::vector<std::uint32_t> shape);

    const ParamEntry& at(const std::string& name) const;
    ParamEntry& at(const std::string& name);
    bool has(const std::string& name) const;

    std::size_t total_values() const;
};

/// True iff names, order, and shapes match exactly.
bool compatible(const ParamSet& a, const ParamSet& b);

/// Same structure as `like`, all values zero.
ParamSet zeros_like(const ParamSet& like);

/// dst += scale * src, element-wise. Throws InvalidInput on incompatible sets.
void add_scaled(ParamSet& dst, const ParamSet& src, double scale);

/// Copy of every entry whose name starts with prefix, with the prefix
/// stripped and order preserved. Throws InvalidInput when nothing matches.
ParamSet subset_with_prefix(const ParamSet& p, const std::string& prefix);

/// Copy of all entries with prefix prepended to each name.
ParamSet with_prefix(const ParamSet& p, const std::string& prefix);

/// Bitwise FNV-1a hash over shapes and value bit patterns; detects any
/// change, including sign-of-zero flips.
std::uint64_t bit_checksum(const ParamSet& p);

/// True iff the two sets are bitwise identical (structure and values).
bool bit_equal(const ParamSet& a, const ParamSet& b);

} // namespace ssdda
