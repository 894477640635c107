#include "carfit/image.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

namespace carfit {

namespace {

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), errc::io_error, "cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::io_error, "cannot open for reading: " + path.string());
    return in;
}

// Reads a PNM header of the expected magic, returning (width, height, maxval).
std::array<int, 3> read_pnm_header(std::istream& in, const std::string& magic,
                                   const std::string& what) {
    std::string token;
    in >> token;
    require(token == magic, errc::parse_error, what + ": expected " + magic);
    std::array<int, 3> fields{};
    for (int i = 0; i < 3; ++i) {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string comment;
            std::getline(in, comment);
            in >> std::ws;
        }
        require(static_cast<bool>(in >> fields[i]), errc::parse_error, what + ": truncated header");
    }
    in.get(); // single whitespace before raster
    require(fields[0] >= 1 && fields[1] >= 1, errc::parse_error, what + ": bad dimensions");
    return fields;
}

} // namespace

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
    auto out = open_out(path);
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.size()));
    require(out.good(), errc::io_error, "short write: " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto [w, h, maxval] = read_pnm_header(in, "P5", path.string());
    require(maxval == 255, errc::parse_error, path.string() + ": expected 8-bit PGM");
    GrayImage image(w, h);
    in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.size()));
    require(in.gcount() == static_cast<std::streamsize>(image.size()), errc::parse_error,
            path.string() + ": truncated raster");
    return image;
}

void write_pgm16(const std::filesystem::path& path, const Gray16Image& image) {
    auto out = open_out(path);
    out << "P5\n" << image.width << " " << image.height << "\n65535\n";
    for (std::uint16_t v : image.pixels) {
        const std::uint8_t bytes[2] = {static_cast<std::uint8_t>(v >> 8),
                                       static_cast<std::uint8_t>(v & 0xff)};
        out.write(reinterpret_cast<const char*>(bytes), 2);
    }
    require(out.good(), errc::io_error, "short write: " + path.string());
}

Gray16Image read_pgm16(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto [w, h, maxval] = read_pnm_header(in, "P5", path.string());
    require(maxval == 65535, errc::parse_error, path.string() + ": expected 16-bit PGM");
    Gray16Image image(w, h);
    for (auto& v : image.pixels) {
        std::uint8_t bytes[2];
        in.read(reinterpret_cast<char*>(bytes), 2);
        v = static_cast<std::uint16_t>((bytes[0] << 8) | bytes[1]);
    }
    require(in.good(), errc::parse_error, path.string() + ": truncated raster");
    return image;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
    auto out = open_out(path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    for (const Rgb& c : image.pixels) {
        const std::uint8_t bytes[3] = {to_byte(c.r), to_byte(c.g), to_byte(c.b)};
        out.write(reinterpret_cast<const char*>(bytes), 3);
    }
    require(out.good(), errc::io_error, "short write: " + path.string());
}

RgbImage read_ppm(const std::filesystem::path& path) {
    auto in = open_in(path);
    const auto [w, h, maxval] = read_pnm_header(in, "P6", path.string());
    require(maxval == 255, errc::parse_error, path.string() + ": expected 8-bit PPM");
    RgbImage image(w, h);
    for (Rgb& c : image.pixels) {
        std::uint8_t bytes[3];
        in.read(reinterpret_cast<char*>(bytes), 3);
        c = Rgb(bytes[0] / 255.0, bytes[1] / 255.0, bytes[2] / 255.0);
    }
    require(in.good(), errc::parse_error, path.string() + ": truncated raster");
    return image;
}

namespace {

constexpr char kDepthMagic[8] = {'D', 'E', 'P', 'T', 'H', '3', '2', 'F'};

void put_u32_le(std::ostream& out, std::uint32_t v) {
    const std::uint8_t bytes[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                                   static_cast<std::uint8_t>(v >> 16),
                                   static_cast<std::uint8_t>(v >> 24)};
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32_le(std::istream& in) {
    std::uint8_t bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

} // namespace

void write_depth_raw(const std::filesystem::path& path, const DepthImage& image) {
    auto out = open_out(path);
    out.write(kDepthMagic, 8);
    put_u32_le(out, static_cast<std::uint32_t>(image.width));
    put_u32_le(out, static_cast<std::uint32_t>(image.height));
    static_assert(sizeof(float) == 4);
    for (float v : image.pixels) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32_le(out, bits);
    }
    require(out.good(), errc::io_error, "short write: " + path.string());
}

DepthImage read_depth_raw(const std::filesystem::path& path) {
    auto in = open_in(path);
    char magic[8];
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kDepthMagic, 8) == 0, errc::parse_error,
            path.string() + ": bad depth magic");
    const int w = static_cast<int>(get_u32_le(in));
    const int h = static_cast<int>(get_u32_le(in));
    require(w >= 1 && h >= 1, errc::parse_error, path.string() + ": bad dimensions");
    DepthImage image(w, h);
    for (float& v : image.pixels) {
        const std::uint32_t bits = get_u32_le(in);
        std::memcpy(&v, &bits, 4);
    }
    require(in.good(), errc::parse_error, path.string() + ": truncated raster");
    return image;
}

namespace {

void png_write_chunk(std::ostream& out, const char type[4], const std::uint8_t* data, size_t len) {
    const std::uint8_t size_be[4] = {
        static_cast<std::uint8_t>(len >> 24), static_cast<std::uint8_t>(len >> 16),
        static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len)};
    out.write(reinterpret_cast<const char*>(size_be), 4);
    out.write(type, 4);
    if (len > 0)
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(len));
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (len > 0)
        crc = crc32(crc, data, static_cast<uInt>(len));
    const std::uint8_t crc_be[4] = {
        static_cast<std::uint8_t>(crc >> 24), static_cast<std::uint8_t>(crc >> 16),
        static_cast<std::uint8_t>(crc >> 8), static_cast<std::uint8_t>(crc)};
    out.write(reinterpret_cast<const char*>(crc_be), 4);
}

void png_write(const std::filesystem::path& path, int width, int height, int channels,
               const std::vector<std::uint8_t>& interleaved) {
    auto out = open_out(path);
    static const std::uint8_t signature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    out.write(reinterpret_cast<const char*>(signature), 8);

    std::uint8_t ihdr[13];
    ihdr[0] = static_cast<std::uint8_t>(width >> 24);
    ihdr[1] = static_cast<std::uint8_t>(width >> 16);
    ihdr[2] = static_cast<std::uint8_t>(width >> 8);
    ihdr[3] = static_cast<std::uint8_t>(width);
    ihdr[4] = static_cast<std::uint8_t>(height >> 24);
    ihdr[5] = static_cast<std::uint8_t>(height >> 16);
    ihdr[6] = static_cast<std::uint8_t>(height >> 8);
    ihdr[7] = static_cast<std::uint8_t>(height);
    ihdr[8] = 8;                                              // bit depth
    ihdr[9] = channels == 3 ? 2 : 0;                          // color type
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    png_write_chunk(out, "IHDR", ihdr, 13);

    // one filter byte (0 = none) per scanline
    const size_t stride = static_cast<size_t>(width) * channels;
    std::vector<std::uint8_t> raw((stride + 1) * height);
    for (int y = 0; y < height; ++y) {
        raw[y * (stride + 1)] = 0;
        std::memcpy(&raw[y * (stride + 1) + 1], &interleaved[y * stride], stride);
    }

    uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(compressed_size);
    const int rc = compress2(compressed.data(), &compressed_size, raw.data(),
                             static_cast<uLong>(raw.size()), 6);
    require(rc == Z_OK, errc::io_error, "zlib compression failed");
    png_write_chunk(out, "IDAT", compressed.data(), compressed_size);
    png_write_chunk(out, "IEND", nullptr, 0);
    require(out.good(), errc::io_error, "short write: " + path.string());
}

} // namespace

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    std::vector<std::uint8_t> data;
    data.reserve(image.size() * 3);
    for (const Rgb& c : image.pixels) {
        data.push_back(to_byte(c.r));
        data.push_back(to_byte(c.g));
        data.push_back(to_byte(c.b));
    }
    png_write(path, image.width, image.height, 3, data);
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
    png_write(path, image.width, image.height, 1, image.pixels);
}

} // namespace carfit
