#include "ssdda/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ssdda/errors.hpp"

namespace ssdda {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

} // namespace

KvConfig KvConfig::parse(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        if (trim(line).empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfig("config line " + std::to_string(line_no) +
                                ": expected 'key = value', got: " + trim(line));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw InvalidConfig("config line " + std::to_string(line_no) + ": empty key");
        cfg.set(key, value);
    }
    return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str());
}

std::string KvConfig::serialize() const {
    std::string out;
    for (const auto& [key, value] : items_) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    }
    return out;
}

void KvConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << serialize();
    if (!out)
        throw IoError("write failed for " + path.string());
}

const std::string* KvConfig::find(const std::string& key) const {
    for (const auto& [k, v] : items_)
        if (k == key)
            return &v;
    return nullptr;
}

bool KvConfig::has(const std::string& key) const {
    return find(key) != nullptr;
}

void KvConfig::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : items_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    items_.emplace_back(key, value);
}

void KvConfig::set_double(const std::string& key, double value) {
    set(key, format_double(value));
}

void KvConfig::set_int(const std::string& key, std::int64_t value) {
    set(key, std::to_string(value));
}

std::string KvConfig::get_string(const std::string& key) const {
    const std::string* v = find(key);
    if (!v)
        throw InvalidConfig("missing config key: " + key);
    return *v;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

double KvConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw InvalidConfig("config key " + key + ": not a real number: " + v);
    return out;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t KvConfig::get_int(const std::string& key) const {
    const std::string v = get_string(key);
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size())
        throw InvalidConfig("config key " + key + ": not an integer: " + v);
    return out;
}

std::int64_t KvConfig::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{})
        throw NumericError("format_double: conversion failed");
    return std::string(buf, ptr);
}

} // namespace ssdda
