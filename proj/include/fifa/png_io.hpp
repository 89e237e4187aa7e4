#pragma once

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "fifa/error.hpp"
#include "fifa/geometry.hpp"
#include "fifa/image.hpp"
#include "fifa/mask.hpp"

namespace fifa {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decode any 8/16-bit PNG to 8-bit rows with `channels` channels (1 or 3).
inline std::vector<std::vector<uint8_t>> read_png_rows(const std::string& path,
                                                       int channels, int& width,
                                                       int& height) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw make_error("FileNotFound", path);
    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw make_error("PngDecodeError", path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_packing(png);
    png_set_expand(png);
    if (channels == 3)
        png_set_gray_to_rgb(png);
    else
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    std::vector<std::vector<uint8_t>> rows(height);
    std::vector<png_bytep> row_ptrs(height);
    for (int y = 0; y < height; ++y) {
        rows[y].resize(static_cast<size_t>(width) * channels);
        row_ptrs[y] = rows[y].data();
    }
    png_read_image(png, row_ptrs.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return rows;
}

inline void write_png_rows(const std::string& path,
                           const std::vector<std::vector<uint8_t>>& rows,
                           int width, int height, int color_type) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw make_error("FileWriteError", path);
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw make_error("PngEncodeError", path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& row : rows)
        png_write_row(png, const_cast<png_bytep>(row.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace detail

inline RgbImage read_png_rgb(const std::string& path) {
    int w = 0, h = 0;
    auto rows = detail::read_png_rows(path, 3, w, h);
    RgbImage img(w, h);
    for (int y = 0; y < h; ++y)
        std::copy(rows[y].begin(), rows[y].end(),
                  img.data.begin() + static_cast<size_t>(y) * w * 3);
    return img;
}

inline void write_png_rgb(const std::string& path, const RgbImage& img) {
    std::vector<std::vector<uint8_t>> rows(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y].assign(img.data.begin() + static_cast<size_t>(y) * img.width * 3,
                       img.data.begin() + static_cast<size_t>(y + 1) * img.width * 3);
    detail::write_png_rows(path, rows, img.width, img.height,
                           PNG_COLOR_TYPE_RGB);
}

// 0/255 single-channel dump for visual inspection.
inline void write_png_mask(const std::string& path, const BitMask& m) {
    std::vector<std::vector<uint8_t>> rows(m.height());
    for (int y = 0; y < m.height(); ++y) {
        rows[y].resize(m.width());
        for (int x = 0; x < m.width(); ++x)
            rows[y][x] = m.get(x, y) ? 255 : 0;
    }
    detail::write_png_rows(path, rows, m.width(), m.height(),
                           PNG_COLOR_TYPE_GRAY);
}

inline BitMask read_png_mask(const std::string& path) {
    int w = 0, h = 0;
    auto rows = detail::read_png_rows(path, 1, w, h);
    BitMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, rows[y][x] >= 128);
    return m;
}

// Parsing map stored as a single-channel PNG of raw label indices.
inline ParsingMap read_png_parsing(const std::string& path, int num_classes = 19) {
    int w = 0, h = 0;
    auto rows = detail::read_png_rows(path, 1, w, h);
    ParsingMap pm;
    pm.width = w;
    pm.height = h;
    pm.num_classes = num_classes;
    pm.labels.reserve(static_cast<size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) pm.labels.push_back(rows[y][x]);
    pm.validate();
    return pm;
}

inline void write_png_parsing(const std::string& path, const ParsingMap& pm) {
    std::vector<std::vector<uint8_t>> rows(pm.height);
    for (int y = 0; y < pm.height; ++y) {
        rows[y].resize(pm.width);
        for (int x = 0; x < pm.width; ++x)
            rows[y][x] = static_cast<uint8_t>(pm.label(x, y));
    }
    detail::write_png_rows(path, rows, pm.width, pm.height, PNG_COLOR_TYPE_GRAY);
}

}  // namespace fifa
