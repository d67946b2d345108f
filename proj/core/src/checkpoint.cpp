#include "ssdda/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

#include <zlib.h>

#include "ssdda/errors.hpp"

namespace ssdda {

namespace {

constexpr char kMagic[5] = {'S', 'S', 'D', 'A', '\x01'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size, const std::filesystem::path& path)
        : data_(data), size_(size), path_(path) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint16_t u16() {
        const std::uint8_t* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    std::uint32_t u32() {
        const std::uint8_t* p = take(4);
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    float f32() {
        const std::uint32_t bits = u32();
        return std::bit_cast<float>(bits);
    }
    std::string str(std::size_t n) {
        const std::uint8_t* p = take(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return size_ - pos_; }

private:
    const std::uint8_t* take(std::size_t n) {
        if (size_ - pos_ < n)
            throw FormatError(path_.string() + ": truncated checkpoint");
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::filesystem::path path_;
};

} // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
    if (params.entries.size() > std::numeric_limits<std::uint32_t>::max())
        throw InvalidInput("save_checkpoint: too many entries");
    std::vector<std::uint8_t> payload;
    put_u32(payload, static_cast<std::uint32_t>(params.entries.size()));
    for (const auto& e : params.entries) {
        if (e.name.size() > std::numeric_limits<std::uint16_t>::max())
            throw InvalidInput("save_checkpoint: entry name too long: " + e.name);
        if (e.shape.size() > 255)
            throw InvalidInput("save_checkpoint: entry rank too large: " + e.name);
        put_u16(payload, static_cast<std::uint16_t>(e.name.size()));
        payload.insert(payload.end(), e.name.begin(), e.name.end());
        payload.push_back(static_cast<std::uint8_t>(e.shape.size()));
        for (std::uint32_t d : e.shape)
            put_u32(payload, d);
        for (double v : e.values)
            put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    const auto crc = static_cast<std::uint32_t>(
        crc32(0L, payload.data(), static_cast<uInt>(payload.size())));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    std::vector<std::uint8_t> tail;
    put_u32(tail, crc);
    out.write(reinterpret_cast<const char*>(tail.data()), 4);
    if (!out)
        throw IoError("write failed for " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + 8)
        throw FormatError(path.string() + ": file too small for a checkpoint");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw FormatError(path.string() + ": bad checkpoint magic");

    const std::uint8_t* payload = bytes.data() + sizeof(kMagic);
    const std::size_t payload_size = bytes.size() - sizeof(kMagic) - 4;
    const std::uint8_t* crc_bytes = payload + payload_size;
    const std::uint32_t stored_crc = static_cast<std::uint32_t>(crc_bytes[0]) |
                                     (static_cast<std::uint32_t>(crc_bytes[1]) << 8) |
                                     (static_cast<std::uint32_t>(crc_bytes[2]) << 16) |
                                     (static_cast<std::uint32_t>(crc_bytes[3]) << 24);
    const auto actual_crc =
        static_cast<std::uint32_t>(crc32(0L, payload, static_cast<uInt>(payload_size)));
    if (stored_crc != actual_crc)
        throw FormatError(path.string() + ": checkpoint CRC mismatch");

    Reader r(payload, payload_size, path);
    const std::uint32_t count = r.u32();
    ParamSet params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        const std::uint8_t rank = r.u8();
        std::vector<std::uint32_t> shape(rank);
        std::size_t volume = 1;
        for (auto& d : shape) {
            d = r.u32();
            volume *= d;
        }
        if (r.remaining() < volume * 4)
            throw FormatError(path.string() + ": truncated values for entry " + name);
        std::vector<double> values(volume);
        for (auto& v : values)
            v = r.f32();
        params.add(std::move(name), std::move(shape), std::move(values));
    }
    if (r.remaining() != 0)
        throw FormatError(path.string() + ": trailing bytes after last entry");
    return params;
}

} // namespace ssdda
