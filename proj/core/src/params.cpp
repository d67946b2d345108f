#include "ssdda/params.hpp"

#include <cstring>

namespace ssdda {

namespace {

std::size_t shape_volume(const std::vector<std::uint32_t>& shape) {
    std::size_t n = 1;
    for (std::uint32_t d : shape)
        n *= d;
    return n;
}

} // namespace

void ParamSet::add(std::string name, std::vector<std::uint32_t> shape, std::vector<double> values) {
    if (has(name))
        throw InvalidInput("duplicate parameter name: " + name);
    if (shape_volume(shape) != values.size())
        throw InvalidInput("parameter " + name + " has " + std::to_string(values.size()) +
                           " values but its shape holds " + std::to_string(shape_volume(shape)));
    entries.push_back({std::move(name), std::move(shape), std::move(values)});
}

void ParamSet::add_zeros(std::string name, std::vector<std::uint32_t> shape) {
    std::vector<double> values(shape_volume(shape), 0.0);
    add(std::move(name), std::move(shape), std::move(values));
}

const ParamEntry& ParamSet::at(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name)
            return e;
    throw InvalidInput("no parameter named " + name);
}

ParamEntry& ParamSet::at(const std::string& name) {
    for (auto& e : entries)
        if (e.name == name)
            return e;
    throw InvalidInput("no parameter named " + name);
}

bool ParamSet::has(const std::string& name) const {
    for (const auto& e : entries)
        if (e.name == name)
            return true;
    return false;
}

std::size_t ParamSet::total_values() const {
    std::size_t n = 0;
    for (const auto& e : entries)
        n += e.values.size();
    return n;
}

bool compatible(const ParamSet& a, const ParamSet& b) {
    if (a.entries.size() != b.entries.size())
        return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        if (a.entries[i].name != b.entries[i].name || a.entries[i].shape != b.entries[i].shape)
            return false;
    }
    return true;
}

ParamSet zeros_like(const ParamSet& like) {
    ParamSet out;
    out.entries.reserve(like.entries.size());
    for (const auto& e : like.entries)
        out.entries.push_back({e.name, e.shape, std::vector<double>(e.values.size(), 0.0)});
    return out;
}

void add_scaled(ParamSet& dst, const ParamSet& src, double scale) {
    if (!compatible(dst, src))
        throw InvalidInput("add_scaled over incompatible ParamSets");
    for (std::size_t i = 0; i < dst.entries.size(); ++i) {
        double* d = dst.entries[i].values.data();
        const double* s = src.entries[i].values.data();
        const std::size_t n = dst.entries[i].values.size();
        for (std::size_t k = 0; k < n; ++k)
            d[k] += scale * s[k];
    }
}

ParamSet subset_with_prefix(const ParamSet& p, const std::string& prefix) {
    ParamSet out;
    for (const auto& e : p.entries)
        if (e.name.starts_with(prefix))
            out.add(e.name.substr(prefix.size()), e.shape, e.values);
    if (out.entries.empty())
        throw InvalidInput("no parameter entry carries the prefix " + prefix);
    return out;
}

ParamSet with_prefix(const ParamSet& p, const std::string& prefix) {
    ParamSet out;
    for (const auto& e : p.entries)
        out.add(prefix + e.name, e.shape, e.values);
    return out;
}

std::uint64_t bit_checksum(const ParamSet& p) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ULL;
        }
    };
    for (const auto& e : p.entries) {
        for (char c : e.name)
            mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
        for (std::uint32_t d : e.shape)
            mix(d);
        for (double v : e.values) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof bits);
            mix(bits);
        }
    }
    return h;
}

bool bit_equal(const ParamSet& a, const ParamSet& b) {
    if (!compatible(a, b))
        return false;
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        const auto& va = a.entries[i].values;
        const auto& vb = b.entries[i].values;
        if (std::memcmp(va.data(), vb.data(), va.size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

} // namespace ssdda
