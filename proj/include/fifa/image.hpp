#pragma once

#include <cstdint>
#include <vector>

#include "fifa/error.hpp"

namespace fifa {

// 8-bit/channel RGB raster, row-major, interleaved.
struct RgbImage {
    int width = 0, height = 0;
    std::vector<uint8_t> data;  // size = width*height*3

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0) {}

    uint8_t channel(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * 3 + c];
    }
    void set_pixel(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
        size_t i = (static_cast<size_t>(y) * width + x) * 3;
        data[i] = r;
        data[i + 1] = g;
        data[i + 2] = b;
    }
};

// Non-negative real-valued single-channel raster.
struct GrayImage {
    int width = 0, height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h, 0.0) {}

    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
};

}  // namespace fifa
