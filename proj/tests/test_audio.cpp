#include <cmath>
#include <cstdio>
#include <numbers>

#include "doctest.h"
#include "wingen/audio.hpp"
#include "wingen/ops.hpp"
#include "wingen/rng.hpp"

using namespace wingen;

namespace {

AudioTrack tone_track(std::size_t frames, std::uint64_t seed) {
    AudioTrack t;
    Rng rng(seed);
    t.samples.resize(frames * 640);
    for (std::size_t i = 0; i < t.samples.size(); ++i) {
        const double s = static_cast<double>(i) / 16000.0;
        const double env = 0.3 + 0.2 * std::sin(static_cast<double>(i / 640) * 0.7);
        t.samples[i] = env * std::sin(2 * std::numbers::pi * 300 * s) + 0.05 * rng.normal();
    }
    return t;
}

AudioCompressConfig desk_compress() { return AudioCompressConfig{}; }

}  // namespace

TEST_CASE("frame bookkeeping") {
    CHECK(samples_per_frame(16000, 25) == 640);
    CHECK_THROWS_AS(samples_per_frame(16000, 24), std::invalid_argument);

    AudioTrack one_second{std::vector<double>(16000, 0.1), 16000};
    auto layers = extract_layers(one_second, 25);
    REQUIRE(layers.size() == 3);
    for (const auto& l : layers) CHECK(l.dim(0) == 25);
    CHECK_THROWS(extract_layers(AudioTrack{std::vector<double>(1000), 16000}, 24));
}

TEST_CASE("silent audio gives zero energies") {
    AudioTrack silent{std::vector<double>(640 * 8, 0.0), 16000};
    for (const auto& l : extract_layers(silent, 25))
        for (double v : l.data()) CHECK(v == 0.0);
}

TEST_CASE("band energy oracle for a pure tone") {
    // a 1 kHz sinusoid of amplitude A has mean power A^2/2, all of it in band floor(1000/500)=2
    const double A = 0.4;
    AudioTrack t;
    for (std::size_t i = 0; i < 640 * 4; ++i) t.samples.push_back(A * std::sin(2 * std::numbers::pi * 1000.0 * i / 16000.0));
    auto layers = extract_layers(t, 25);
    // time before the track counts as silence in the wider causal windows
    const std::size_t windows[3] = {1, 2, 4};
    for (std::size_t li = 0; li < 3; ++li)
        for (std::size_t f = 0; f < 4; ++f) {
            const double filled = static_cast<double>(std::min(f + 1, windows[li])) / windows[li];
            const double expect = std::log1p(10.0 * A * A / 2.0 * filled);
            for (std::size_t b = 0; b < layers[li].dim(1); ++b)
                CHECK(layers[li].at(f, b) == doctest::Approx(b == 2 ? expect : 0.0).epsilon(1e-9));
        }
}

TEST_CASE("envelope is per-frame RMS") {
    AudioTrack t{std::vector<double>(1280, 0.0), 16000};
    for (std::size_t i = 640; i < 1280; ++i) t.samples[i] = (i % 2) ? 0.5 : -0.5;
    auto env = energy_envelope(t, 25);
    REQUIRE(env.size() == 2);
    CHECK(env[0] == 0.0);
    CHECK(env[1] == doctest::Approx(0.5));
}

TEST_CASE("uniform layer weights and token layout") {
    ModelParams p;
    auto cfg = desk_compress();
    init_audio_params(p, 3, 8, cfg, 7);
    auto layers = extract_layers(tone_track(16, 1), 25);
    auto f = compute_audio_features(p, audio_window(layers, 0, 16, cfg.history()), cfg);
    for (std::size_t l = 0; l < 3; ++l) CHECK(f.layer_weights[l] == doctest::Approx(1.0 / 3));
    CHECK(f.per_latent_tokens.shape() == Shape{4, 4, 16});
    // each latent frame spans stride_t / fps seconds of audio
    CHECK(cfg.stride_t / 25.0 == doctest::Approx(0.16));
}

TEST_CASE("compression is causal per latent block") {
    ModelParams p;
    auto cfg = desk_compress();
    init_audio_params(p, 3, 8, cfg, 11);
    AudioTrack a = tone_track(16, 2), b = a;
    Rng rng(5);
    for (std::size_t i = 8 * 640; i < b.samples.size(); ++i) b.samples[i] += 0.3 * rng.normal();
    auto fa = compute_audio_features(p, audio_window(extract_layers(a, 25), 0, 16, cfg.history()), cfg);
    auto fb = compute_audio_features(p, audio_window(extract_layers(b, 25), 0, 16, cfg.history()), cfg);
    const std::size_t block = 4 * 16;
    for (std::size_t t = 0; t < 4; ++t) {
        double diff = 0.0;
        for (std::size_t i = t * block; i < (t + 1) * block; ++i)
            diff = std::max(diff, std::abs(fa.per_latent_tokens[i] - fb.per_latent_tokens[i]));
        if (t < 2)
            CHECK(diff == 0.0);
        else
            CHECK(diff > 0.0);
    }
}

TEST_CASE("window slicing matches whole-track features") {
    ModelParams p;
    auto cfg = desk_compress();
    init_audio_params(p, 3, 8, cfg, 3);
    auto layers = extract_layers(tone_track(24, 4), 25);
    auto whole = compute_audio_features(p, audio_window(layers, 0, 24, cfg.history()), cfg);
    auto tail = compute_audio_features(p, audio_window(layers, 8, 16, cfg.history()), cfg);
    const std::size_t block = 4 * 16;
    for (std::size_t i = 0; i < tail.per_latent_tokens.size(); ++i)
        CHECK(tail.per_latent_tokens[i] == whole.per_latent_tokens[2 * block + i]);
    CHECK_THROWS_AS(audio_window(layers, 20, 8, 4), std::out_of_range);
}

TEST_CASE("precondition errors") {
    ModelParams p;
    auto cfg = desk_compress();
    init_audio_params(p, 3, 8, cfg, 3);
    auto layers = extract_layers(tone_track(16, 4), 25);
    auto w = audio_window(layers, 0, 16, 4);
    w.layers[1] = DenseArray({19, 8}, Precision::double_);
    CHECK_THROWS_AS(compute_audio_features(p, w, cfg), ShapeError);
    CHECK_THROWS_AS(compute_audio_features(p, audio_window(layers, 0, 14, 4), cfg), ShapeError);
}

TEST_CASE("layer logits receive gradient") {
    ModelParams p;
    auto cfg = desk_compress();
    init_audio_params(p, 3, 8, cfg, 9);
    auto window = audio_window(extract_layers(tone_track(16, 6), 25), 0, 16, cfg.history());
    Tape tape(Precision::double_);
    ParamBinder bind(tape, p, nullptr, GradScope::routed);
    Var tokens = aggregate_and_compress(bind, window, cfg);
    Rng rng(1);
    Var loss = ops::weighted_sum(tokens, rng.normal_array(tokens.shape(), Precision::double_));
    auto g = grad(tape, loss, bind.trainable_shapes());
    CHECK(g.diagnostics.empty());
    CHECK(sum_squares(g.grads.at("audio.layer_logits")) > 0.0);
}

TEST_CASE("WGA1 round trip") {
    AudioTrack t = tone_track(3, 8);
    const std::string path = "test_audio_roundtrip.wga";
    write_audio(path, t);
    AudioTrack r = read_audio(path);
    CHECK(r.sample_rate == 16000);
    REQUIRE(r.samples.size() == t.samples.size());
    for (std::size_t i = 0; i < t.samples.size(); ++i) CHECK(r.samples[i] == static_cast<float>(t.samples[i]));
    std::remove(path.c_str());
    CHECK_THROWS(read_audio("does_not_exist.wga"));
}
