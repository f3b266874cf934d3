#include "senet/image_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "senet/error.hpp"

namespace senet {

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in, const std::string& path) {
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw ParseError(path + ": truncated netpbm header");
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        if (c == '#') {
            std::string dummy;
            std::getline(in, dummy);
            continue;
        }
        break;
    }
    int v = 0;
    if (!(in >> v)) throw ParseError(path + ": malformed netpbm header");
    return v;
}

std::vector<std::uint8_t> read_raster(std::istream& in, std::size_t n, const std::string& path) {
    in.get();  // single whitespace byte after maxval
    std::vector<std::uint8_t> bytes(n);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw ParseError(path + ": truncated raster data");
    return bytes;
}

std::string read_magic(std::istream& in, const std::string& path) {
    std::string magic;
    if (!(in >> magic)) throw IoError(path + ": cannot read magic");
    return magic;
}

std::ifstream open_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    return f;
}

}  // namespace

TensorF read_pgm(const std::string& path) {
    auto f = open_file(path);
    if (read_magic(f, path) != "P5") throw FormatError(path + ": expected P5");
    const int w = next_header_int(f, path);
    const int h = next_header_int(f, path);
    const int maxval = next_header_int(f, path);
    if (w <= 0 || h <= 0 || maxval != 255) throw FormatError(path + ": unsupported PGM geometry/maxval");
    const auto bytes = read_raster(f, std::size_t(w) * std::size_t(h), path);
    TensorF out(Shape{h, w});
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = float(bytes[std::size_t(i)]) / 255.0f;
    return out;
}

TensorF read_ppm(const std::string& path) {
    auto f = open_file(path);
    if (read_magic(f, path) != "P6") throw FormatError(path + ": expected P6");
    const int w = next_header_int(f, path);
    const int h = next_header_int(f, path);
    const int maxval = next_header_int(f, path);
    if (w <= 0 || h <= 0 || maxval != 255) throw FormatError(path + ": unsupported PPM geometry/maxval");
    const auto bytes = read_raster(f, 3 * std::size_t(w) * std::size_t(h), path);
    TensorF out(Shape{3, h, w});
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            for (std::int64_t c = 0; c < 3; ++c)
                out.at3(c, y, x) = float(bytes[std::size_t((y * w + x) * 3 + c)]) / 255.0f;
    return out;
}

TensorF read_image(const std::string& path) {
    auto f = open_file(path);
    const std::string magic = read_magic(f, path);
    f.close();
    if (magic == "P5") return read_pgm(path);
    if (magic == "P6") return read_ppm(path);
    throw FormatError(path + ": unsupported image magic '" + magic + "' (PGM P5 / PPM P6 supported)");
}

void write_pgm(const std::string& path, const TensorF& gray) {
    if (gray.rank() != 2) throw DimError("write_pgm expects [H,W]");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    const std::int64_t h = gray.dim(0), w = gray.dim(1);
    f << "P5\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> bytes(std::size_t(h * w));
    for (std::int64_t i = 0; i < h * w; ++i)
        bytes[std::size_t(i)] = std::uint8_t(std::lround(255.0 * std::clamp(double(gray[i]), 0.0, 1.0)));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + path);
}

void write_ppm(const std::string& path, const TensorF& rgb) {
    if (rgb.rank() != 3 || rgb.dim(0) != 3) throw DimError("write_ppm expects [3,H,W]");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    const std::int64_t h = rgb.dim(1), w = rgb.dim(2);
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> bytes(std::size_t(3 * h * w));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
            for (std::int64_t c = 0; c < 3; ++c)
                bytes[std::size_t((y * w + x) * 3 + c)] =
                    std::uint8_t(std::lround(255.0 * std::clamp(double(rgb.at3(c, y, x)), 0.0, 1.0)));
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + path);
}

}  // namespace senet
