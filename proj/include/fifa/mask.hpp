#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fifa/error.hpp"

namespace fifa {

// Half-open pixel box [x0,x1) x [y0,y1).
struct Box {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool contains(int x, int y) const {
        return x >= x0 && x < x1 && y >= y0 && y < y1;
    }
    bool operator==(const Box&) const = default;
};

// Row-major binary raster. The universal currency for region masks, artifact
// masks and predictions.
class BitMask {
  public:
    BitMask() = default;
    BitMask(int width, int height, uint8_t fill = 0)
        : width_(width), height_(height),
          bits_(static_cast<size_t>(width) * height, fill ? 1 : 0) {
        if (width < 1 || height < 1)
            throw make_error("BadDimensions", "mask dimensions must be >= 1");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return bits_.size(); }

    bool get(int x, int y) const {
        return bits_[static_cast<size_t>(y) * width_ + x] != 0;
    }
    void set(int x, int y, bool v = true) {
        bits_[static_cast<size_t>(y) * width_ + x] = v ? 1 : 0;
    }
    uint8_t at(size_t i) const { return bits_[i]; }
    void set_at(size_t i, bool v) { bits_[i] = v ? 1 : 0; }

    const std::vector<uint8_t>& bits() const { return bits_; }

    long long area() const {
        long long n = 0;
        for (uint8_t b : bits_) n += b;
        return n;
    }

    bool same_size(const BitMask& o) const {
        return width_ == o.width_ && height_ == o.height_;
    }
    bool operator==(const BitMask&) const = default;

  private:
    int width_ = 0, height_ = 0;
    std::vector<uint8_t> bits_;
};

enum class SetOp { Union, Intersect, Difference };

inline BitMask set_op(const BitMask& a, const BitMask& b, SetOp op) {
    if (!a.same_size(b))
        throw make_error("DimensionMismatch", "set_op operands differ in size");
    BitMask out(a.width(), a.height());
    for (size_t i = 0; i < a.size(); ++i) {
        bool va = a.at(i) != 0, vb = b.at(i) != 0, r = false;
        switch (op) {
            case SetOp::Union: r = va || vb; break;
            case SetOp::Intersect: r = va && vb; break;
            case SetOp::Difference: r = va && !vb; break;
        }
        out.set_at(i, r);
    }
    return out;
}

struct MaskMeasure {
    long long area = 0;
    std::optional<Box> bbox;
};

inline MaskMeasure measure(const BitMask& m) {
    MaskMeasure r;
    int minx = m.width(), miny = m.height(), maxx = -1, maxy = -1;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.get(x, y)) {
                ++r.area;
                minx = std::min(minx, x);
                miny = std::min(miny, y);
                maxx = std::max(maxx, x);
                maxy = std::max(maxy, y);
            }
    if (r.area > 0) r.bbox = Box{minx, miny, maxx + 1, maxy + 1};
    return r;
}

inline long long intersect_area_with_box(const BitMask& m, const Box& b) {
    long long n = 0;
    int x0 = std::max(0, b.x0), x1 = std::min(m.width(), b.x1);
    int y0 = std::max(0, b.y0), y1 = std::min(m.height(), b.y1);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
            if (m.get(x, y)) ++n;
    return n;
}

// Scanline even-odd polygon fill sampled at pixel centers (x+0.5, y+0.5).
// Points outside the canvas are clipped implicitly by the raster bounds.
inline BitMask rasterize_polygon(const std::vector<std::pair<double, double>>& points,
                                 int width, int height) {
    if (points.size() < 3)
        throw make_error("DegeneratePolygon", "polygon needs at least 3 points");
    BitMask out(width, height);
    const size_t n = points.size();
    std::vector<double> xs;
    for (int y = 0; y < height; ++y) {
        const double cy = y + 0.5;
        xs.clear();
        for (size_t i = 0; i < n; ++i) {
            const auto& [px0, py0] = points[i];
            const auto& [px1, py1] = points[(i + 1) % n];
            // Half-open vertex rule avoids double-counting shared endpoints.
            if ((py0 <= cy && py1 > cy) || (py1 <= cy && py0 > cy)) {
                double t = (cy - py0) / (py1 - py0);
                xs.push_back(px0 + t * (px1 - px0));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (size_t k = 0; k + 1 < xs.size(); k += 2) {
            int x_start = static_cast<int>(std::max(0.0, std::ceil(xs[k] - 0.5)));
            int x_end = std::min(width - 1,
                                 static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
            for (int x = x_start; x <= x_end; ++x) out.set(x, y);
        }
    }
    return out;
}

// Row-major run-length encoding; the first run counts zeros.
struct RleMask {
    int width = 0, height = 0;
    std::vector<long long> counts;

    bool operator==(const RleMask&) const = default;
};

inline RleMask rle_encode(const BitMask& m) {
    RleMask r;
    r.width = m.width();
    r.height = m.height();
    uint8_t cur = 0;
    long long run = 0;
    for (size_t i = 0; i < m.size(); ++i) {
        if (m.at(i) == cur) {
            ++run;
        } else {
            r.counts.push_back(run);
            cur = m.at(i);
            run = 1;
        }
    }
    r.counts.push_back(run);
    return r;
}

inline BitMask rle_decode(const RleMask& r) {
    BitMask m(r.width, r.height);
    size_t pos = 0;
    uint8_t cur = 0;
    for (long long c : r.counts) {
        if (c < 0) throw make_error("RleSumMismatch", "negative run length");
        for (long long k = 0; k < c; ++k) {
            if (pos >= m.size())
                throw make_error("RleSumMismatch", "runs exceed width*height");
            m.set_at(pos++, cur != 0);
        }
        cur = cur ? 0 : 1;
    }
    if (pos != m.size())
        throw make_error("RleSumMismatch", "runs do not cover width*height");
    return m;
}

// JSON form: {"size":[h,w],"counts":[...]} (size is height-first).
inline nlohmann::json rle_to_json(const RleMask& r) {
    return {{"size", {r.height, r.width}}, {"counts", r.counts}};
}

inline RleMask rle_from_json(const nlohmann::json& j) {
    RleMask r;
    const auto& size = j.at("size");
    if (!size.is_array() || size.size() != 2)
        throw make_error("ParseError", "rle size must be [h,w]");
    r.height = size.at(0).get<int>();
    r.width = size.at(1).get<int>();
    r.counts = j.at("counts").get<std::vector<long long>>();
    long long total = 0;
    for (long long c : r.counts) {
        if (c < 0) throw make_error("RleSumMismatch", "negative run length");
        total += c;
    }
    if (total != static_cast<long long>(r.width) * r.height)
        throw make_error("RleSumMismatch", "runs do not cover width*height");
    return r;
}

}  // namespace fifa
