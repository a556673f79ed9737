#include <doctest.h>

#include <cmath>
#include <limits>

#include "mimir/error.hpp"
#include "mimir/projection.hpp"

using namespace mimir;

namespace {

VolumeGrid constant_volume(float c) {
    VolumeGrid v(12, 10, 8, 2, 1.0f);
    for (float& x : v.voxels) x = c;
    return v;
}

}  // namespace

TEST_CASE("tile layout is (H + W) x D") {
    const ProjectionTile t = project(constant_volume(1.0f));
    CHECK(t.channels == 2);
    CHECK(t.height == 18);
    CHECK(t.width == 12);
}

TEST_CASE("constant volume projects to an all-ones tile") {
    const ProjectionTile t = project(constant_volume(0.7f));
    for (float p : t.pixels) CHECK(p == 1.0f);
}

TEST_CASE("zero volume projects to zeros without error") {
    const ProjectionTile t = project(constant_volume(0.0f));
    for (float p : t.pixels) CHECK(p == 0.0f);
}

TEST_CASE("one voxel gives one coronal pixel of v over the averaged extent") {
    VolumeGrid v(12, 10, 8, 2, 1.0f);
    v.at(0, 3, 4, 5) = 2.0f;
    const ProjectionTile t = project_unnormalized(v);
    std::size_t nonzero = 0;
    for (std::size_t y = 0; y < 10; ++y) {
        for (std::size_t x = 0; x < 12; ++x) {
            if (t.at(0, y, x) != 0.0f) ++nonzero;
        }
    }
    CHECK(nonzero == 1);
    CHECK(t.at(0, 4, 3) == doctest::Approx(2.0 / 8.0));
    // sagittal panel: rows follow W, averaged over H
    CHECK(t.at(0, 10 + 5, 3) == doctest::Approx(2.0 / 10.0));
}

TEST_CASE("projection rejects bad volumes") {
    VolumeGrid one(8, 8, 8, 1, 1.0f);
    CHECK_THROWS_AS(project(one), ValidationError);
    VolumeGrid bad = constant_volume(1.0f);
    bad.voxels[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(project(bad), ValidationError);
    bad.voxels[5] = -1.0f;
    CHECK_THROWS_AS(project(bad), ValidationError);
}

TEST_CASE("projection is linear before normalization") {
    VolumeGrid v(12, 10, 8, 2, 1.0f);
    for (std::size_t i = 0; i < v.voxels.size(); ++i) v.voxels[i] = static_cast<float>((i * 37) % 11) / 4.0f;
    VolumeGrid scaled = v;
    for (float& x : scaled.voxels) x *= 4.0f;
    const ProjectionTile a = project_unnormalized(v);
    const ProjectionTile b = project_unnormalized(scaled);
    for (std::size_t i = 0; i < a.pixels.size(); ++i) CHECK(b.pixels[i] == doctest::Approx(4.0 * a.pixels[i]).epsilon(1e-6));
}

TEST_CASE("translation along D shifts panel columns") {
    VolumeGrid v(16, 10, 8, 2, 1.0f);
    for (std::size_t d = 4; d < 8; ++d)
        for (std::size_t h = 2; h < 7; ++h)
            for (std::size_t w = 1; w < 5; ++w) v.at(1, d, h, w) = static_cast<float>(d + h + w);
    VolumeGrid moved(16, 10, 8, 2, 1.0f);
    for (std::size_t d = 4; d < 8; ++d)
        for (std::size_t h = 2; h < 7; ++h)
            for (std::size_t w = 1; w < 5; ++w) moved.at(1, d + 3, h, w) = v.at(1, d, h, w);
    const ProjectionTile a = project_unnormalized(v);
    const ProjectionTile b = project_unnormalized(moved);
    for (std::size_t y = 0; y < a.height; ++y)
        for (std::size_t x = 0; x + 3 < a.width; ++x) CHECK(b.at(1, y, x + 3) == a.at(1, y, x));
}

TEST_CASE("resize to identical dims is bit-identical") {
    ProjectionTile t(2, 9, 11);
    for (std::size_t i = 0; i < t.pixels.size(); ++i) t.pixels[i] = static_cast<float>(i % 7) / 7.0f;
    CHECK(resize_tile(t, 9, 11) == t);
}

TEST_CASE("constant tile resizes to the same constant") {
    ProjectionTile t(2, 20, 14);
    for (float& p : t.pixels) p = 0.375f;
    const ProjectionTile r = resize_tile(t, 9, 31);
    CHECK(r.height == 9);
    CHECK(r.width == 31);
    for (float p : r.pixels) CHECK(p == doctest::Approx(0.375));
}

TEST_CASE("2x2 checkerboard resized to 1x1 is the four-pixel mean") {
    ProjectionTile t(1, 2, 2);
    t.pixels = {1.0f, 0.0f, 0.0f, 1.0f};
    CHECK(resize_tile(t, 1, 1).pixels[0] == doctest::Approx(0.5));
    t.pixels = {0.2f, 0.4f, 0.6f, 1.0f};
    CHECK(resize_tile(t, 1, 1).pixels[0] == doctest::Approx(0.55));
}

TEST_CASE("resize keeps values in range and rejects zero dims") {
    ProjectionTile t(2, 16, 16);
    for (std::size_t i = 0; i < t.pixels.size(); ++i) t.pixels[i] = (i % 3 == 0) ? 1.0f : 0.0f;
    for (float p : resize_tile(t, 40, 13).pixels) CHECK((p >= 0.0f && p <= 1.0f));
    CHECK_THROWS_AS(resize_tile(t, 0, 8), ValidationError);
}
