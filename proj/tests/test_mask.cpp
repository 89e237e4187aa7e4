#include <catch2/catch_amalgamated.hpp>

#include "fifa/mask.hpp"
#include "fifa/rng.hpp"

using namespace fifa;

namespace {

// Independent even-odd oracle: count scanline intersections at or left of the
// pixel center.
bool oracle_inside(const std::vector<std::pair<double, double>>& pts, double cx,
                   double cy) {
    int crossings = 0;
    const size_t n = pts.size();
    for (size_t i = 0; i < n; ++i) {
        const auto& [x0, y0] = pts[i];
        const auto& [x1, y1] = pts[(i + 1) % n];
        if ((y0 <= cy && y1 > cy) || (y1 <= cy && y0 > cy)) {
            double t = (cy - y0) / (y1 - y0);
            if (x0 + t * (x1 - x0) <= cx) ++crossings;
        }
    }
    return crossings % 2 == 1;
}

BitMask oracle_rasterize(const std::vector<std::pair<double, double>>& pts,
                         int w, int h) {
    BitMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (oracle_inside(pts, x + 0.5, y + 0.5)) m.set(x, y);
    return m;
}

BitMask random_mask(SplitMix64& rng, int w, int h, double density = 0.4) {
    BitMask m(w, h);
    for (size_t i = 0; i < m.size(); ++i) m.set_at(i, rng.unit() < density);
    return m;
}

}  // namespace

TEST_CASE("axis-aligned square rasterizes to its pixel count") {
    BitMask m = rasterize_polygon({{0, 0}, {4, 0}, {4, 4}, {0, 4}}, 8, 8);
    CHECK(m.area() == 16);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(m.get(x, y));
}

TEST_CASE("triangle matches the per-pixel even-odd oracle") {
    std::vector<std::pair<double, double>> tri = {{0, 0}, {6, 0}, {0, 6}};
    CHECK(rasterize_polygon(tri, 8, 8) == oracle_rasterize(tri, 8, 8));
}

TEST_CASE("random polygons match the even-odd oracle") {
    SplitMix64 rng(101);
    for (int it = 0; it < 200; ++it) {
        int n = 3 + static_cast<int>(rng.below(6));
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < n; ++i)
            // Quarter-pixel offsets keep centers off exact edge intersections.
            pts.push_back({static_cast<double>(rng.range(-2, 17)) + 0.25,
                           static_cast<double>(rng.range(-2, 17)) + 0.25});
        CHECK(rasterize_polygon(pts, 16, 16) == oracle_rasterize(pts, 16, 16));
    }
}

TEST_CASE("degenerate polygon is rejected") {
    CHECK_THROWS_AS(rasterize_polygon({{0, 0}, {1, 1}}, 4, 4), Error);
}

TEST_CASE("rasterization is translation-consistent") {
    SplitMix64 rng(77);
    std::vector<std::pair<double, double>> pts = {
        {2.25, 3.25}, {9.25, 2.25}, {11.25, 9.25}, {4.25, 10.25}};
    BitMask base = rasterize_polygon(pts, 24, 24);
    for (int it = 0; it < 10; ++it) {
        int dx = static_cast<int>(rng.range(0, 8));
        int dy = static_cast<int>(rng.range(0, 8));
        auto moved = pts;
        for (auto& [x, y] : moved) {
            x += dx;
            y += dy;
        }
        BitMask shifted = rasterize_polygon(moved, 24, 24);
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) {
                bool expect = x >= dx && y >= dy && base.get(x - dx, y - dy);
                REQUIRE(shifted.get(x, y) == expect);
            }
    }
}

TEST_CASE("set operations match the pixel-loop oracle") {
    SplitMix64 rng(5);
    for (int it = 0; it < 50; ++it) {
        BitMask a = random_mask(rng, 16, 16), b = random_mask(rng, 16, 16);
        BitMask u = set_op(a, b, SetOp::Union);
        BitMask i = set_op(a, b, SetOp::Intersect);
        BitMask d = set_op(a, b, SetOp::Difference);
        for (size_t k = 0; k < a.size(); ++k) {
            bool va = a.at(k), vb = b.at(k);
            REQUIRE(static_cast<bool>(u.at(k)) == (va || vb));
            REQUIRE(static_cast<bool>(i.at(k)) == (va && vb));
            REQUIRE(static_cast<bool>(d.at(k)) == (va && !vb));
        }
        // |union| + |intersect| == |a| + |b|
        CHECK(u.area() + i.area() == a.area() + b.area());
        // commutativity and idempotence
        CHECK(set_op(b, a, SetOp::Union) == u);
        CHECK(set_op(b, a, SetOp::Intersect) == i);
        CHECK(set_op(a, a, SetOp::Intersect) == a);
    }
}

TEST_CASE("set_op rejects mismatched dimensions") {
    CHECK_THROWS_AS(set_op(BitMask(3, 3), BitMask(4, 3), SetOp::Union), Error);
}

TEST_CASE("union of disjoint masks adds areas") {
    BitMask a(8, 8), b(8, 8);
    for (int i = 0; i < 5; ++i) a.set(i, 0);
    for (int i = 0; i < 7; ++i) b.set(i, 4);
    CHECK(set_op(a, b, SetOp::Union).area() == 12);
}

TEST_CASE("measure reports area and tight bbox") {
    BitMask empty(6, 6);
    MaskMeasure me = measure(empty);
    CHECK(me.area == 0);
    CHECK(!me.bbox);

    BitMask one(8, 8);
    one.set(3, 5);
    MaskMeasure mo = measure(one);
    CHECK(mo.area == 1);
    REQUIRE(mo.bbox);
    CHECK(*mo.bbox == Box{3, 5, 4, 6});

    SplitMix64 rng(9);
    for (int it = 0; it < 30; ++it) {
        BitMask m = random_mask(rng, 12, 9, 0.15);
        MaskMeasure r = measure(m);
        long long area = 0;
        int minx = 12, miny = 9, maxx = -1, maxy = -1;
        for (int y = 0; y < 9; ++y)
            for (int x = 0; x < 12; ++x)
                if (m.get(x, y)) {
                    ++area;
                    minx = std::min(minx, x);
                    maxx = std::max(maxx, x);
                    miny = std::min(miny, y);
                    maxy = std::max(maxy, y);
                }
        REQUIRE(r.area == area);
        if (area == 0) {
            REQUIRE(!r.bbox);
        } else {
            REQUIRE(*r.bbox == Box{minx, miny, maxx + 1, maxy + 1});
            // bbox touches a set pixel on each side
            bool left = false, right = false, top = false, bottom = false;
            for (int y = r.bbox->y0; y < r.bbox->y1; ++y) {
                left = left || m.get(r.bbox->x0, y);
                right = right || m.get(r.bbox->x1 - 1, y);
            }
            for (int x = r.bbox->x0; x < r.bbox->x1; ++x) {
                top = top || m.get(x, r.bbox->y0);
                bottom = bottom || m.get(x, r.bbox->y1 - 1);
            }
            REQUIRE((left && right && top && bottom));
        }
    }
}

TEST_CASE("run-length encoding fixed cases") {
    BitMask zeros(4, 4);
    CHECK(rle_encode(zeros).counts == std::vector<long long>{16});
    BitMask ones(4, 4, 1);
    CHECK(rle_encode(ones).counts == std::vector<long long>{0, 16});
}

TEST_CASE("run-length round trip is the identity on 1000 random masks") {
    SplitMix64 rng(2024);
    for (int it = 0; it < 1000; ++it) {
        int w = 1 + static_cast<int>(rng.below(20));
        int h = 1 + static_cast<int>(rng.below(20));
        BitMask m = random_mask(rng, w, h, rng.unit());
        RleMask r = rle_encode(m);
        long long sum = 0;
        for (long long c : r.counts) sum += c;
        REQUIRE(sum == static_cast<long long>(w) * h);
        REQUIRE(rle_decode(r) == m);
    }
}

TEST_CASE("run-length decode validates totals") {
    RleMask bad{4, 4, {10}};
    CHECK_THROWS_AS(rle_decode(bad), Error);
    RleMask over{2, 2, {3, 3}};
    CHECK_THROWS_AS(rle_decode(over), Error);
}

TEST_CASE("RLE JSON round trip") {
    SplitMix64 rng(31);
    BitMask m = random_mask(rng, 7, 5);
    RleMask r = rle_encode(m);
    nlohmann::json j = rle_to_json(r);
    CHECK(j.at("size") == nlohmann::json({5, 7}));
    CHECK(rle_from_json(j) == r);
    nlohmann::json bad = {{"size", {2, 2}}, {"counts", {1, 1}}};
    CHECK_THROWS_AS(rle_from_json(bad), Error);
}

TEST_CASE("box helpers") {
    Box b{2, 3, 5, 7};
    CHECK(b.area() == 12);
    CHECK(b.contains(2, 3));
    CHECK(!b.contains(5, 3));
    BitMask m(8, 8, 1);
    CHECK(intersect_area_with_box(m, b) == 12);
    CHECK(intersect_area_with_box(m, Box{-4, -4, 2, 2}) == 4);
}
