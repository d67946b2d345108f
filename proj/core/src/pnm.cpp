#include "ssdda/pnm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ssdda/errors.hpp"

namespace ssdda {

namespace {

void write_bytes(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::uint8_t>& pixels) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out)
        throw IoError("write failed for " + path.string());
}

// Consumes netpbm header whitespace, including '#' comments to end of line.
void skip_space(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            while (c != '\n' && c != EOF)
                c = in.get();
        } else if (std::isspace(c)) {
            in.get();
        } else {
            return;
        }
    }
}

int read_header_int(std::istream& in, const std::filesystem::path& path, const char* what) {
    skip_space(in);
    int v = 0;
    if (!(in >> v) || v <= 0)
        throw FormatError(path.string() + ": bad or missing " + what);
    return v;
}

std::vector<std::uint8_t> read_raster(const std::filesystem::path& path, const char* magic,
                                      int channels, int& height, int& width) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != magic[0] || m1 != magic[1])
        throw FormatError(path.string() + ": expected " + magic + " magic");
    width = read_header_int(in, path, "width");
    height = read_header_int(in, path, "height");
    const int maxval = read_header_int(in, path, "maxval");
    if (maxval != 255)
        throw FormatError(path.string() + ": only maxval 255 is supported");
    in.get(); // single whitespace byte separating header from raster
    std::vector<std::uint8_t> pixels(static_cast<std::size_t>(height) * width * channels);
    in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(pixels.size()))
        throw FormatError(path.string() + ": truncated raster data");
    return pixels;
}

} // namespace

void write_ppm(const std::filesystem::path& path, const SegImage& image) {
    if (image.channels != 3)
        throw InvalidInput("write_ppm: expected a 3-channel image");
    image.validate();
    std::string header = "P6\n" + std::to_string(image.width) + " " +
                         std::to_string(image.height) + "\n255\n";
    std::vector<std::uint8_t> pixels(image.data.size());
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<std::uint8_t>(std::lround(image.data[i] * 255.0));
    write_bytes(path, header, pixels);
}

SegImage read_ppm(const std::filesystem::path& path) {
    int height = 0, width = 0;
    const auto pixels = read_raster(path, "P6", 3, height, width);
    SegImage image(height, width, 3);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        image.data[i] = pixels[i] / 255.0;
    return image;
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
    std::string header = "P5\n" + std::to_string(labels.width) + " " +
                         std::to_string(labels.height) + "\n255\n";
    std::vector<std::uint8_t> pixels(labels.data.begin(), labels.data.end());
    write_bytes(path, header, pixels);
}

LabelMap read_pgm(const std::filesystem::path& path) {
    int height = 0, width = 0;
    const auto pixels = read_raster(path, "P5", 1, height, width);
    LabelMap labels(height, width);
    labels.data.assign(pixels.begin(), pixels.end());
    return labels;
}

} // namespace ssdda
