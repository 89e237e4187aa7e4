// Regenerates the committed synthetic end-to-end fixtures: a real/fake image
// pair with a known tampered rectangle, dense landmarks, and a face-parsing
// map covering every class. Deterministic: rerunning produces identical bytes.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

#include "fifa/geometry.hpp"
#include "fifa/image.hpp"
#include "fifa/png_io.hpp"
#include "fifa/rng.hpp"

int main(int argc, char** argv) {
    const std::string dir = argc > 1 ? argv[1] : "tests/fixtures";
    std::filesystem::create_directories(dir);
    const int w = 64, h = 64;

    // Smooth gradient base image.
    fifa::RgbImage real(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            real.set_pixel(x, y, static_cast<uint8_t>((x * 3) % 256),
                           static_cast<uint8_t>((y * 3) % 256),
                           static_cast<uint8_t>((x + y) % 256));
    fifa::write_png_rgb(dir + "/real.png", real);

    // Tampered copy: perturbed rectangle [16,48) x [16,48).
    fifa::RgbImage fake = real;
    for (int y = 16; y < 48; ++y)
        for (int x = 16; x < 48; ++x) {
            int d = 10 + (x * 7 + y * 13) % 100;
            auto bump = [&](int c) {
                int v = fake.channel(x, y, c) + d;
                return static_cast<uint8_t>(v > 255 ? v - 255 : v);
            };
            fake.set_pixel(x, y, bump(0), bump(1), bump(2));
        }
    fifa::write_png_rgb(dir + "/fake.png", fake);

    // Face-parsing map with all 19 classes present.
    fifa::ParsingMap pm;
    pm.width = w;
    pm.height = h;
    pm.num_classes = 19;
    pm.labels.assign(static_cast<size_t>(w) * h, 0);
    auto paint = [&](int x0, int y0, int x1, int y1, int label) {
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) pm.labels[y * w + x] = label;
    };
    paint(8, 2, 56, 12, 17);    // hair
    paint(16, 0, 48, 4, 18);    // hat
    paint(12, 12, 52, 52, 1);   // skin
    paint(16, 16, 28, 19, 2);   // l_brow
    paint(36, 16, 48, 19, 3);   // r_brow
    paint(14, 19, 50, 21, 6);   // eye_g
    paint(18, 21, 26, 25, 4);   // l_eye
    paint(38, 21, 46, 25, 5);   // r_eye
    paint(8, 24, 12, 34, 7);    // l_ear
    paint(52, 24, 56, 34, 8);   // r_ear
    paint(8, 34, 11, 38, 9);    // ear_r
    paint(28, 26, 36, 36, 10);  // nose
    paint(24, 38, 40, 40, 12);  // u_lip
    paint(24, 40, 40, 44, 11);  // mouth
    paint(24, 44, 40, 46, 13);  // l_lip
    paint(20, 52, 44, 60, 14);  // neck
    paint(24, 56, 40, 58, 15);  // neck_l
    paint(0, 60, 64, 64, 16);   // cloth
    fifa::write_png_parsing(dir + "/parsing.png", pm);

    // 478 pseudo-random landmark points inside the canvas.
    fifa::SplitMix64 rng(42);
    nlohmann::json points = nlohmann::json::array();
    for (int i = 0; i < 478; ++i) {
        double x = 4.0 + rng.unit() * 56.0;
        double y = 4.0 + rng.unit() * 56.0;
        points.push_back({std::round(x * 100.0) / 100.0,
                          std::round(y * 100.0) / 100.0});
    }
    std::ofstream lm(dir + "/landmarks.json", std::ios::binary | std::ios::trunc);
    lm << nlohmann::json{{"points", points}}.dump() << "\n";

    std::cout << "fixtures written to " << dir << "\n";
    return 0;
}
