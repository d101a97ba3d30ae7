#include "doctest.h"
#include "wingen/framepack.hpp"
#include "wingen/ops.hpp"
#include "wingen/rng.hpp"

using namespace wingen;

namespace {

LatentVideo random_latent(std::size_t T, std::size_t C, std::size_t H, std::size_t W, std::uint64_t seed) {
    Rng rng(seed);
    return LatentVideo{rng.normal_array({T, C, H, W}, Precision::double_), {4, 16, 16}};
}

const Triple kVideoPatch{1, 2, 2};

}  // namespace

TEST_CASE("patchify round trip and layout") {
    auto z = random_latent(2, 3, 4, 6, 1);
    DenseArray tok = patchify(z.grid, {1, 2, 2});
    CHECK(tok.shape() == Shape{2 * 2 * 3, 12});
    // token (t=1, h=0, w=2), feature (c=2, dh=1, dw=0)
    CHECK(tok.at(1 * 6 + 2, 2 * 4 + 2) == z.grid[((1 * 3 + 2) * 4 + 1) * 6 + 4]);
    CHECK(unpatchify(tok, {1, 2, 2}, z.grid.shape()) == z.grid);
    DenseArray coarse = patchify(z.grid, {2, 2, 3});
    CHECK(unpatchify(coarse, {2, 2, 3}, z.grid.shape()) == z.grid);
    CHECK_THROWS_AS(patchify(z.grid, {1, 3, 2}), ShapeError);
}

TEST_CASE("default two-tier plan compresses 48 tokens to 20") {
    const PackPlan plan{{{1, {1, 2, 2}}, {2, {2, 4, 4}}}};
    Shape s{3, 16, 8, 8};
    CHECK(packed_token_count(s, plan) == 20);
    CHECK(packed_token_count(s, PackPlan::uniform(kVideoPatch)) == 48);
    CHECK(48.0 / 20.0 == doctest::Approx(2.4));

    ModelParams p;
    init_pack_params(p, plan, 16, 8, 3);
    Tape tape(Precision::double_, false);
    ParamBinder bind(tape, p, nullptr, GradScope::none);
    auto packed = pack(bind, random_latent(3, 16, 8, 8, 2), plan, kVideoPatch);
    REQUIRE(packed.tokens);
    CHECK(packed.tokens->shape() == Shape{20, 8});
    CHECK(packed.positions.size() == 20);
    // oldest (coarse) bucket first, then the recent fine bucket ending at -1
    CHECK(packed.positions.pos.front() == Position{-3, 0, 0});
    CHECK(packed.positions.pos[1] == Position{-3, 0, 2});
    CHECK(packed.positions.pos[4] == Position{-1, 0, 0});
    CHECK(packed.positions.pos.back() == Position{-1, 3, 3});
}

TEST_CASE("degenerate and empty contexts") {
    const PackPlan plan = PackPlan::uniform(kVideoPatch);
    ModelParams p;
    init_pack_params(p, plan, 4, 8, 3);
    Tape tape(Precision::double_, false);
    ParamBinder bind(tape, p, nullptr, GradScope::none);

    auto ctx = random_latent(3, 4, 4, 4, 5);
    auto packed = pack(bind, ctx, plan, kVideoPatch);
    CHECK(packed.positions.size() == patchify(ctx.grid, kVideoPatch).dim(0));

    LatentVideo empty{DenseArray({0, 4, 4, 4}, Precision::double_), {4, 16, 16}};
    auto none = pack(bind, empty, plan, kVideoPatch);
    CHECK_FALSE(none.tokens);
    CHECK(none.positions.size() == 0);
    CHECK(packed_token_count(empty.grid.shape(), plan) == 0);
}

TEST_CASE("short context drops the oldest buckets") {
    const PackPlan plan{};
    CHECK(resolve_buckets(plan, 1) == std::vector<std::size_t>{1});
    CHECK(resolve_buckets(plan, 5) == std::vector<std::size_t>{1, 4});
    const PackPlan bounded{{{1, {1, 2, 2}}, {2, {2, 4, 4}}}};
    CHECK_THROWS_AS(resolve_buckets(bounded, 4), ShapeError);
    // rest bucket of 3 latents cannot be split by pt = 2
    CHECK_THROWS_AS(packed_token_count({4, 4, 8, 8}, plan), ShapeError);
}

TEST_CASE("packing never increases token count and keeps positions negative") {
    Rng rng(77);
    const Triple coarse[] = {{1, 2, 2}, {1, 4, 4}, {2, 2, 2}, {2, 4, 4}};
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t recent = 1 + rng.below(2);
        const Triple pc = coarse[rng.below(4)];
        const std::size_t rest = pc.t * (1 + rng.below(3));
        const PackPlan plan{{{recent, {1, 2, 2}}, {0, pc}}};
        const Shape s{recent + rest, 2, 8, 8};
        const std::size_t packed = packed_token_count(s, plan);
        const std::size_t unpacked = packed_token_count(s, PackPlan::uniform(kVideoPatch));
        CHECK(packed <= unpacked);
        CHECK((packed == unpacked) == (pc == Triple{1, 2, 2}));

        ModelParams p;
        init_pack_params(p, plan, 2, 4, trial);
        Tape tape(Precision::double_, false);
        ParamBinder bind(tape, p, nullptr, GradScope::none);
        auto out = pack(bind, random_latent(s[0], 2, 8, 8, trial), plan, kVideoPatch);
        int max_t = -100;
        for (const auto& pos : out.positions.pos) {
            CHECK(pos.t < 0);
            max_t = std::max(max_t, pos.t);
        }
        CHECK(max_t == -1);
    }
}

TEST_CASE("recent latent feeds fine tokens, oldest feeds only coarse tokens") {
    const PackPlan plan{};
    ModelParams p;
    init_pack_params(p, plan, 4, 8, 9);
    auto base = random_latent(3, 4, 8, 8, 10);
    auto run = [&](const LatentVideo& z) {
        Tape tape(Precision::double_, false);
        ParamBinder bind(tape, p, nullptr, GradScope::none);
        return pack(bind, z, plan, kVideoPatch).tokens->value();
    };
    const DenseArray ref = run(base);
    const std::size_t n_coarse = 4, D = 8;  // 2 latents at (2,4,4) over 8x8 -> 4 tokens

    auto changed_rows = [&](const DenseArray& out) {
        std::vector<bool> rows(out.dim(0), false);
        for (std::size_t i = 0; i < out.size(); ++i)
            if (out[i] != ref[i]) rows[i / D] = true;
        return rows;
    };
    for (std::size_t which : {std::size_t{0}, std::size_t{2}}) {
        LatentVideo z = base;
        const std::size_t per = 4 * 8 * 8;
        for (std::size_t i = which * per; i < (which + 1) * per; ++i) z.grid.mutable_data()[i] += 1.0;
        auto rows = changed_rows(run(z));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (which == 0)
                CHECK(rows[r] == (r < n_coarse));
            else
                CHECK(rows[r] == (r >= n_coarse));
        }
    }
}
