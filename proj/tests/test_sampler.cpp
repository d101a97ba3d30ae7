#include <cmath>

#include "doctest.h"
#include "wingen/rng.hpp"
#include "wingen/sampler.hpp"

using namespace wingen;

TEST_CASE("schedule mapping examples") {
    CHECK(shift_timestep(0.5, 5.0) == doctest::Approx(2.5 / 3.0).epsilon(1e-15));
    auto uni = build_schedule(10, 1.0);
    for (std::size_t i = 0; i <= 10; ++i) CHECK(uni.timesteps[i] == doctest::Approx(1.0 - i / 10.0).epsilon(1e-15));
    for (double s : {0.2, 1.0, 5.0, 16.0}) {
        CHECK(shift_timestep(0.0, s) == 0.0);
        CHECK(shift_timestep(1.0, s) == 1.0);
    }
    CHECK_THROWS(build_schedule(0, 5.0));
    CHECK_THROWS(build_schedule(5, 0.0));
}

TEST_CASE("schedules are strictly decreasing with exact endpoints") {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const double shift = 1e-3 + 16.0 * rng.uniform_open();
        const std::size_t steps = 1 + rng.below(80);
        auto s = build_schedule(steps, shift);
        REQUIRE(s.timesteps.size() == steps + 1);
        CHECK(s.timesteps.front() == 1.0);
        CHECK(s.timesteps.back() == 0.0);
        for (std::size_t k = 0; k + 1 < s.timesteps.size(); ++k) CHECK(s.timesteps[k] > s.timesteps[k + 1]);
    }
}

TEST_CASE("truncation keeps timesteps at or below the start") {
    auto s = build_schedule(50, 5.0);
    // independent count: u_i = 1 - i/50 maps below 0.95 when u < 0.95 / (5 - 4 * 0.95)
    const double u_max = 0.95 / (5.0 - 4.0 * 0.95);
    std::size_t expect = 0;
    for (int i = 0; i <= 50; ++i)
        if (1.0 - i / 50.0 <= u_max + 1e-12) ++expect;
    auto tr = truncate_schedule(s, 0.95);
    CHECK(tr.timesteps.size() == expect);
    for (double t : tr.timesteps) CHECK(t <= 0.95);
    CHECK(truncate_schedule(s, 1.0).timesteps == s.timesteps);
    CHECK(truncate_schedule(s, 0.0).timesteps == std::vector<double>{0.0});
    CHECK_THROWS_WITH(truncate_schedule(s, 1e-4), doctest::Contains("below smallest timestep"));
    std::size_t prev = 0;
    for (int i = 0; i <= 100; ++i) {
        const double a = i / 100.0;
        std::size_t n = 0;
        try {
            n = truncate_schedule(s, a).timesteps.size();
        } catch (const std::invalid_argument&) {
            continue;
        }
        CHECK(n >= prev);
        prev = n;
    }
}

TEST_CASE("guidance arithmetic") {
    DenseArray vc = DenseArray::matrix({{1, 2}}), vu = DenseArray::matrix({{0, 0}});
    CHECK(cfg_velocity(vc, vu, 1.0) == vc);
    CHECK(cfg_velocity(vc, vu, 0.0) == vu);
    CHECK(cfg_velocity(DenseArray::matrix({{1}}), DenseArray::matrix({{0}}), 6.5)[0] == 6.5);
    CHECK_THROWS_AS(cfg_velocity(vc, DenseArray::matrix({{1}}), 2.0), ShapeError);
}

TEST_CASE("Euler is exact for the oracle velocity") {
    Rng rng(3);
    for (std::size_t steps : {1, 7, 50}) {
        DenseArray z0 = rng.normal_array({2, 4, 4, 4}, Precision::single);
        DenseArray eps = rng.normal_array({2, 4, 4, 4}, Precision::single);
        const DenseArray v_true = sub(eps, z0);
        SampleTrace trace;
        DenseArray out = sample(eps, build_schedule(steps, 5.0), [&](const DenseArray&, double) { return v_true; }, &trace);
        CHECK(max_abs_diff(out, z0) < 1e-6);
        CHECK(trace.evaluated.size() == steps);
    }
}

TEST_CASE("joint guidance drops text and audio together") {
    ModelConfig c = ModelConfig::desk();
    c.gate_mode = GateMode::scalar;
    auto p = init_model(c, 2);
    // open the gates so audio matters
    for (std::size_t b : c.audio_blocks) p.set("blocks." + std::to_string(b) + ".audio_gate", DenseArray::matrix({{0.5}}));
    Rng rng(4);
    LatentVideo ref{rng.normal_array({1, 16, 4, 4}, Precision::double_), {4, 16, 16}};
    DenseArray text = encode_text("a speaker", c.text_tokens, c.text_dim);
    std::vector<DenseArray> layers;
    for (int l = 0; l < 3; ++l) layers.push_back(rng.normal_array({16, 8}, Precision::double_));
    AudioWindow audio = audio_window(layers, 0, 16, 4);
    GuidedModel g{&p, nullptr, &c, nullptr, &ref, &text, &audio};
    DenseArray z = rng.normal_array({4, 16, 4, 4}, Precision::double_);

    auto direct = [&](bool cond) {
        DenseArray null_text(text.shape(), Precision::double_);
        LatentVideo v{z, {4, 16, 16}};
        DitInput in{nullptr, &v, &ref, cond ? &text : &null_text, &audio, !cond, 0.7};
        return predict_velocity(p, nullptr, c, in).grid;
    };
    DenseArray expect = cfg_velocity(direct(true), direct(false), 6.5);
    CHECK(g(z, 0.7) == expect);
    CHECK(g(z, 0.7) == g(z, 0.7));
    g.guidance.scale = 1.0;
    CHECK(g(z, 0.7) == direct(true));
    g.guidance.mode = GuidanceMode::split;
    g.guidance.text_scale = g.guidance.audio_scale = 1.0;
    CHECK(max_abs_diff(g(z, 0.7), direct(true)) < 1e-12);
}
