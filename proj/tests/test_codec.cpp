#include <cmath>

#include "doctest.h"
#include "wingen/codec.hpp"
#include "wingen/rng.hpp"

using namespace wingen;

namespace {
PixelVideo random_video(std::size_t t, std::size_t h, std::size_t w, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> d(t * 3 * h * w);
    for (auto& v : d) v = rng.uniform();
    return PixelVideo{DenseArray({t, 3, h, w}, std::move(d), Precision::double_), 25.0};
}
}  // namespace

TEST_CASE("encode shapes follow the stride contract") {
    LatentCodec codec(CodecConfig{{4, 16, 16}, 48, 1});
    auto z = codec.encode(random_video(16, 128, 128, 3));
    CHECK(z.grid.shape() == Shape{4, 48, 8, 8});

    PixelVideo zero{DenseArray({16, 3, 32, 32}, Precision::double_), 25.0};
    auto z0 = codec.encode(zero);
    CHECK(sum_squares(z0.grid) == 0.0);
    CHECK(sum_squares(codec.decode(z0).frames) == 0.0);
}

TEST_CASE("non-divisible axes are rejected by name") {
    LatentCodec codec(CodecConfig{{4, 16, 16}, 16, 1});
    try {
        codec.encode(random_video(15, 32, 32, 1));
        FAIL("expected error");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("time") != std::string::npos);
    }
    try {
        codec.encode(random_video(16, 40, 32, 1));
        FAIL("expected error");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("height") != std::string::npos);
    }
}

TEST_CASE("full-rank codec reconstructs exactly") {
    LatentCodec codec(CodecConfig{{4, 16, 16}, 3 * 4 * 16 * 16, 9});
    auto v = random_video(4, 16, 32, 5);
    auto back = codec.decode(codec.encode(v));
    CHECK(max_abs_diff(back.frames, v.frames) < 1e-12);
}

TEST_CASE("reconstruction error strictly decreases with latent channels") {
    auto v = random_video(8, 32, 32, 6);
    double prev = INFINITY;
    for (std::size_t c : {3, 8, 16, 48, 128, 512}) {
        LatentCodec codec(CodecConfig{{4, 16, 16}, c, 2});
        const double err = sum_squares(sub(codec.decode(codec.encode(v)).frames, v.frames));
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("encode is linear and decode∘encode is a projection") {
    LatentCodec codec(CodecConfig{{4, 16, 16}, 16, 4});
    auto v1 = random_video(8, 32, 32, 1);
    auto v2 = random_video(8, 32, 32, 2);
    const double a = 0.3, b = -1.7;
    PixelVideo mix{add(scaled(v1.frames, a), scaled(v2.frames, b)), 25.0};
    auto lhs = codec.encode(mix).grid;
    auto rhs = add(scaled(codec.encode(v1).grid, a), scaled(codec.encode(v2).grid, b));
    CHECK(max_abs_diff(lhs, rhs) < 1e-6);

    auto once = codec.decode(codec.encode(v1));
    auto twice = codec.decode(codec.encode(once));
    CHECK(max_abs_diff(once.frames, twice.frames) < 1e-6);
}

TEST_CASE("first latent channels are per-colour block means") {
    LatentCodec codec(CodecConfig{{4, 16, 16}, 3, 4});
    std::vector<double> d(4 * 3 * 16 * 16);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 256; ++i) d[(t * 3 + c) * 256 + i] = 0.1 * (c + 1);
    auto z = codec.encode(PixelVideo{DenseArray({4, 3, 16, 16}, d, Precision::double_), 25.0});
    // mean * sqrt(1024)
    for (std::size_t c = 0; c < 3; ++c) CHECK(z.grid[c] == doctest::Approx(0.1 * (c + 1) * 32.0));
}

TEST_CASE("seeded basis is orthonormal") {
    auto q = seeded_orthonormal_basis(16, 77);
    auto g = matmul(q, transpose(q));
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) CHECK(std::abs(g.at(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("token counts") {
    CHECK(token_count(16, 128, 128, {4, 16, 16}, {1, 2, 2}) == 64);
    CHECK(token_count(16, 128, 128, {4, 8, 8}, {1, 2, 2}) == 256);
    LatentVideo z{DenseArray({4, 5, 8, 8}), {4, 16, 16}};
    CHECK(token_count(z, {1, 1, 1}) == 256);
    CHECK_THROWS_AS(token_count(z, {1, 3, 2}), ShapeError);
}

TEST_CASE("token ratio between strides is exactly four") {
    for (std::size_t t : {4, 8, 16})
        for (std::size_t h : {32, 64, 96})
            for (std::size_t w : {32, 64, 128}) {
                const auto fine = token_count(t, h, w, {4, 8, 8}, {1, 2, 2});
                const auto coarse = token_count(t, h, w, {4, 16, 16}, {1, 2, 2});
                CHECK(fine == 4 * coarse);
            }
}
