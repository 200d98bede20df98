#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "mito/core/geometry.hpp"
#include "mito/core/random.hpp"

using namespace mito;

namespace {

ImageU8 random_raster(int w, int h, int c, Rng& rng) {
    ImageU8 img(w, h, c);
    for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.uniform_index(256));
    return img;
}

// Independent reflection oracle: walk the index back into range one bounce
// at a time instead of using the closed-form fold.
int oracle_reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

TEST_CASE("reflect_index matches bounce oracle", "[core]") {
    for (int n : {1, 2, 3, 7, 80}) {
        for (int i = -5 * n; i < 5 * n; ++i) {
            CAPTURE(i, n);
            REQUIRE(reflect_index(i, n) == oracle_reflect(i, n));
        }
    }
}

TEST_CASE("extract_patch interior crop equals plain crop", "[core]") {
    Rng rng(11);
    const ImageU8 frame = random_raster(200, 200, 3, rng);
    const ImageU8 patch = extract_patch(frame, {100, 100}, 80);
    REQUIRE(patch.width() == 80);
    REQUIRE(patch.height() == 80);
    for (int y = 0; y < 80; ++y) {
        for (int x = 0; x < 80; ++x) {
            for (int c = 0; c < 3; ++c) {
                REQUIRE(patch.at(x, y, c) == frame.at(60 + x, 60 + y, c));
            }
        }
    }
}

TEST_CASE("extract_patch corner crop matches reflect-pad oracle", "[core]") {
    Rng rng(12);
    const ImageU8 frame = random_raster(100, 100, 3, rng);
    const ImageU8 patch = extract_patch(frame, {0, 0}, 80);
    // Oracle: reflect-pad the whole frame then crop.
    for (int y = 0; y < 80; ++y) {
        for (int x = 0; x < 80; ++x) {
            const int sx = oracle_reflect(x - 40, 100);
            const int sy = oracle_reflect(y - 40, 100);
            for (int c = 0; c < 3; ++c) {
                REQUIRE(patch.at(x, y, c) == frame.at(sx, sy, c));
            }
        }
    }
    // Top-left quadrant mirrors interior content.
    REQUIRE(patch.at(39, 40, 0) == patch.at(40, 40, 0));
}

TEST_CASE("extract_patch rejects out-of-frame centers", "[core]") {
    Rng rng(13);
    const ImageU8 frame = random_raster(50, 50, 3, rng);
    REQUIRE_THROWS_AS(extract_patch(frame, {-1, 10}, 16), std::invalid_argument);
    REQUIRE_THROWS_AS(extract_patch(frame, {10, 50}, 16), std::invalid_argument);
    REQUIRE_THROWS_AS(extract_patch(frame, {10, 10}, 0), std::invalid_argument);
}

TEST_CASE("resize_patch keeps constant fields exact", "[core]") {
    ImageU8 patch(80, 80, 3);
    for (auto& v : patch.data()) v = 137;
    const ImageU8 out = resize_patch(patch, 224);
    REQUIRE(out.width() == 224);
    for (const auto& v : out.data()) REQUIRE(v == 137);
}

TEST_CASE("resize_patch 2x2 checkerboard matches hand-computed bilinear weights", "[core]") {
    ImageF32 patch(2, 2, 1);
    const float a = 100.f, b = 20.f;
    patch.at(0, 0) = a;
    patch.at(1, 0) = b;
    patch.at(0, 1) = b;
    patch.at(1, 1) = a;
    const ImageF32 out = resize_patch(patch, 4);

    // Half-pixel mapping: output coords {0,1,2,3} -> source positions
    // {0, 0.25, 0.75, 1} after clamping. Hand-computed tensor products:
    auto expect = [&](int xo, int yo) {
        const double pos[4] = {0.0, 0.25, 0.75, 1.0};
        const double fx = pos[xo], fy = pos[yo];
        return static_cast<float>(a * (1 - fx) * (1 - fy) + b * fx * (1 - fy) +
                                  b * (1 - fx) * fy + a * fx * fy);
    };
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
            CAPTURE(x, y);
            REQUIRE(out.at(x, y) == Catch::Approx(expect(x, y)).margin(1e-4));
        }
    }
}

TEST_CASE("resize_patch identity and errors", "[core]") {
    Rng rng(14);
    const ImageU8 patch = random_raster(224, 224, 3, rng);
    REQUIRE(resize_patch(patch, 224) == patch);
    const ImageU8 rect = random_raster(10, 20, 3, rng);
    REQUIRE_THROWS_AS(resize_patch(rect, 8), std::invalid_argument);
}

TEST_CASE("resize_patch output stays in input range", "[core]") {
    Rng rng(15);
    const ImageU8 patch = random_raster(13, 13, 3, rng);
    std::uint8_t lo = 255, hi = 0;
    for (auto v : patch.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (int target : {5, 17, 40}) {
        const ImageU8 out = resize_patch(patch, target);
        for (auto v : out.data()) {
            REQUIRE(v >= lo);
            REQUIRE(v <= hi);
        }
    }
}

TEST_CASE("tile_grid single tile when tile covers frame", "[core]") {
    const auto tiles = tile_grid(3000, 3000, 3000, 0);
    REQUIRE(tiles.size() == 1);
    REQUIRE(tiles[0] == TileRect{0, 0, 3000, 3000});

    const auto clamped = tile_grid(100, 80, 300, 50);
    REQUIRE(clamped.size() == 1);
    REQUIRE(clamped[0] == TileRect{0, 0, 100, 80});
}

TEST_CASE("tile_grid stride arithmetic example", "[core]") {
    const auto tiles = tile_grid(5000, 3000, 3000, 500);
    std::set<int> xs, ys;
    for (const auto& t : tiles) {
        xs.insert(t.x);
        ys.insert(t.y);
    }
    REQUIRE(xs == std::set<int>{0, 2000});
    REQUIRE(ys == std::set<int>{0});
}

TEST_CASE("tile_grid covers every pixel for random sizes", "[core]") {
    Rng rng(16);
    for (int trial = 0; trial < 200; ++trial) {
        const int w = 1 + static_cast<int>(rng.uniform_index(400));
        const int h = 1 + static_cast<int>(rng.uniform_index(400));
        const int tile = 1 + static_cast<int>(rng.uniform_index(200));
        const int overlap = static_cast<int>(rng.uniform_index(tile));
        CAPTURE(w, h, tile, overlap);
        const auto tiles = tile_grid(w, h, tile, overlap);
        std::vector<int> covered(static_cast<std::size_t>(w) * h, 0);
        for (const auto& t : tiles) {
            REQUIRE(t.x >= 0);
            REQUIRE(t.y >= 0);
            REQUIRE(t.x + t.width <= w);
            REQUIRE(t.y + t.height <= h);
            for (int y = t.y; y < t.y + t.height; ++y) {
                for (int x = t.x; x < t.x + t.width; ++x) {
                    covered[static_cast<std::size_t>(y) * w + x] = 1;
                }
            }
        }
        for (int v : covered) REQUIRE(v == 1);
    }
}

TEST_CASE("tile_grid origins sorted row-major and deterministic", "[core]") {
    const auto a = tile_grid(777, 555, 128, 32);
    const auto b = tile_grid(777, 555, 128, 32);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
    for (std::size_t i = 1; i < a.size(); ++i) {
        const bool ordered = a[i].y > a[i - 1].y || (a[i].y == a[i - 1].y && a[i].x > a[i - 1].x);
        REQUIRE(ordered);
    }
}

TEST_CASE("dihedral identity, involution, inverses", "[core]") {
    Rng rng(17);
    const ImageU8 raster = random_raster(33, 33, 3, rng);
    REQUIRE(apply_dihedral(raster, DihedralTransform(0)) == raster);

    const ImageU8 r180 = apply_dihedral(raster, DihedralTransform(2));
    REQUIRE(apply_dihedral(r180, DihedralTransform(2)) == raster);

    for (int k = 0; k < 8; ++k) {
        const DihedralTransform t(k);
        const ImageU8 once = apply_dihedral(raster, t);
        REQUIRE(apply_dihedral(once, t.inverse()) == raster);
    }
}

TEST_CASE("dihedral group closes under composition with unique inverses", "[core]") {
    std::set<int> inverses;
    for (int a = 0; a < 8; ++a) {
        inverses.insert(DihedralTransform(a).inverse().index);
        for (int b = 0; b < 8; ++b) {
            const DihedralTransform c = compose(DihedralTransform(a), DihedralTransform(b));
            REQUIRE(c.index >= 0);
            REQUIRE(c.index <= 7);
        }
    }
    REQUIRE(inverses.size() == 8);
}

TEST_CASE("dihedral raster action agrees with the point map", "[core]") {
    Rng rng(18);
    const int n = 17;
    const ImageU8 raster = random_raster(n, n, 1, rng);
    for (int k = 0; k < 8; ++k) {
        const DihedralTransform t(k);
        const ImageU8 moved = apply_dihedral(raster, t);
        for (int trial = 0; trial < 50; ++trial) {
            const int x = static_cast<int>(rng.uniform_index(n));
            const int y = static_cast<int>(rng.uniform_index(n));
            const Point dst = transform_point({x + 0.5, y + 0.5}, t, n);
            const int dx = static_cast<int>(dst.x);  // center back to pixel index
            const int dy = static_cast<int>(dst.y);
            CAPTURE(k, x, y, dx, dy);
            REQUIRE(moved.at(dx, dy, 0) == raster.at(x, y, 0));
        }
    }
}

TEST_CASE("dihedral group-orbit average matches independent point-map oracle", "[core]") {
    Rng rng(19);
    const int n = 12;
    ImageF32 raster(n, n, 1);
    for (auto& v : raster.data()) v = static_cast<float>(rng.uniform());

    ImageF32 mean(n, n, 1, 0.f);
    for (int k = 0; k < 8; ++k) {
        const ImageF32 moved = apply_dihedral(raster, DihedralTransform(k));
        for (std::size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += moved.data()[i];
    }
    for (auto& v : mean.data()) v /= 8.f;

    // Oracle: accumulate source pixels through the point maps directly.
    ImageF32 oracle(n, n, 1, 0.f);
    for (int k = 0; k < 8; ++k) {
        const DihedralTransform t(k);
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const Point dst = transform_point({x + 0.5, y + 0.5}, t, n);
                oracle.at(static_cast<int>(dst.x), static_cast<int>(dst.y)) += raster.at(x, y);
            }
        }
    }
    for (auto& v : oracle.data()) v /= 8.f;
    for (std::size_t i = 0; i < mean.data().size(); ++i) {
        REQUIRE(mean.data()[i] == Catch::Approx(oracle.data()[i]).margin(1e-6));
    }
}

TEST_CASE("bounding box diagonal invariant under dihedral transforms", "[core]") {
    const int n = 100;
    const BoundingBox box(10, 20, 34, 41);
    for (int k = 0; k < 8; ++k) {
        const BoundingBox moved = transform_box(box, DihedralTransform(k), n);
        REQUIRE(moved.diagonal() == Catch::Approx(box.diagonal()).epsilon(1e-12));
        REQUIRE(moved.x0 >= 0);
        REQUIRE(moved.y0 >= 0);
        REQUIRE(moved.x1 <= n);
        REQUIRE(moved.y1 <= n);
    }
}

TEST_CASE("apply_dihedral rejects non-square rasters", "[core]") {
    Rng rng(20);
    const ImageU8 rect = random_raster(8, 6, 1, rng);
    REQUIRE_THROWS_AS(apply_dihedral(rect, DihedralTransform(1)), std::invalid_argument);
}

TEST_CASE("rng uniform_index is unbiased across range and deterministic", "[core]") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.uniform_index(17) == b.uniform_index(17));
    Rng c(43);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) counts[c.uniform_index(5)]++;
    for (int v : counts) REQUIRE(std::abs(v - 10000) < 500);
}
