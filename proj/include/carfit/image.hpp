#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "carfit/errors.hpp"

namespace carfit {

/// Row-major raster. (x, y) indexes column x of row y; y grows downward.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> pixels;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    T& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    size_t size() const { return pixels.size(); }

    bool operator==(const Image& other) const {
        return width == other.width && height == other.height && pixels == other.pixels;
    }
};

struct Rgb {
    double r = 0.0, g = 0.0, b = 0.0;

    Rgb() = default;
    Rgb(double r_, double g_, double b_) : r(r_), g(g_), b(b_) {}

    Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
    Rgb operator-(const Rgb& o) const { return {r - o.r, g - o.g, b - o.b}; }
    Rgb operator*(double s) const { return {r * s, g * s, b * s}; }
    bool operator==(const Rgb& o) const { return r == o.r && g == o.g && b == o.b; }
};

using GrayImage = Image<std::uint8_t>;
using Gray16Image = Image<std::uint16_t>;
using DepthImage = Image<float>;
using RgbImage = Image<Rgb>;

inline constexpr float kDepthBackground = std::numeric_limits<float>::infinity();

// 8-bit binary PGM (P5).
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

// 16-bit binary PGM (P5, maxval 65535, big-endian samples).
void write_pgm16(const std::filesystem::path& path, const Gray16Image& image);
Gray16Image read_pgm16(const std::filesystem::path& path);

// Binary PPM (P6), channels clamped from [0,1] doubles.
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

// Raw depth: 16-byte header (8-byte magic "DEPTH32F", u32 width, u32 height,
// both little-endian) followed by width*height little-endian f32, +inf for
// background.
void write_depth_raw(const std::filesystem::path& path, const DepthImage& image);
DepthImage read_depth_raw(const std::filesystem::path& path);

// Minimal PNG writers (8-bit, zlib-compressed, no interlacing).
void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

} // namespace carfit
