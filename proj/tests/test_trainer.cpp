#include <cmath>
#include <limits>

#include "doctest.h"
#include "wingen/trainer.hpp"

using namespace wingen;

namespace {

struct World {
    ModelConfig model = ModelConfig::desk();
    TrainConfig train = TrainConfig::desk();
    LatentCodec codec{CodecConfig{}};
    std::vector<FixtureRecord> pool;

    World() {
        for (std::uint64_t i = 0; i < 2; ++i) {
            FixtureSpec s;
            s.seed = 40 + i;
            s.frames = 32;
            pool.push_back(make_fixture(s));
        }
    }

    TrainingExample example(std::size_t k, bool with_context = true) const {
        TrainingWindow w;
        w.zero_context = !with_context;
        w.context_start = 0;
        w.video_start = with_context ? 12 : 4;
        w.reference_frame = 30;
        return make_example(pool[k], w, codec, model, train);
    }
};

}  // namespace

TEST_CASE("window sampling branches") {
    Rng rng(1);
    const auto large = TrainConfig::full_scale();
    CHECK(large.context_frames + large.video_frames == 152);
    auto w = sample_training_window(200, large.context_frames, large.video_frames, rng);
    REQUIRE(w);
    CHECK_FALSE(w->zero_context);
    CHECK(w->video_start == w->context_start + 72);
    CHECK(w->reference_frame >= w->video_start + 80);
    CHECK(w->reference_frame < 200);

    auto z = sample_training_window(100, large.context_frames, large.video_frames, rng);
    REQUIRE(z);
    CHECK(z->zero_context);
    CHECK(z->video_start + 80 <= 100);

    for (int i = 0; i < 50; ++i) {
        auto e = sample_training_window(152, 72, 80, rng);
        REQUIRE(e);
        CHECK(e->context_start == 0);
        CHECK(e->reference_fallback);
        CHECK(e->reference_frame == 151);
    }
    CHECK_FALSE(sample_training_window(79, 72, 80, rng));
    for (int i = 0; i < 100; ++i) {
        auto a = sample_training_window(64, 12, 16, rng, 4);
        CHECK(a->context_start % 4 == 0);
        CHECK(a->video_start % 4 == 0);
    }
}

TEST_CASE("condition dropout rates") {
    Rng rng(2);
    for (int i = 0; i < 100; ++i) {
        auto none = apply_condition_dropout({0, 0, 0}, rng);
        CHECK_FALSE((none.text || none.image || none.audio));
        auto all = apply_condition_dropout({1, 1, 1}, rng);
        CHECK((all.text && all.image && all.audio));
    }
    std::size_t n[3] = {0, 0, 0};
    for (int i = 0; i < 10000; ++i) {
        auto d = apply_condition_dropout({0.1, 0.1, 0.1}, rng);
        n[0] += d.text;
        n[1] += d.image;
        n[2] += d.audio;
    }
    for (auto c : n) {
        CHECK(c >= 800);
        CHECK(c <= 1200);
    }
    CHECK_THROWS(apply_condition_dropout({1.5, 0, 0}, rng));
    CHECK(DropDecision{}.describe() == "none");
    CHECK(DropDecision{true, false, true}.describe() == "text,audio");
}

TEST_CASE("ROI loss combines region means with normalizer Z") {
    World w;
    auto params = init_model(w.model, 3);
    auto ex = w.example(0);
    Rng rng(4);
    const DenseArray eps = rng.normal_array(ex.z0.grid.shape(), Precision::double_);
    for (RoiLossWeights rw : {RoiLossWeights{1, 1, 1}, RoiLossWeights{2, 0.5, 3}}) {
        Tape tape(Precision::double_, false);
        ParamBinder bind(tape, params, nullptr, GradScope::none);
        auto r = flow_loss(bind, w.model, ex, rw, 0.6, eps);
        CHECK(r.total.value()[0] ==
              doctest::Approx((rw.full * r.full + rw.body * r.body + rw.face * r.face) / rw.z()).epsilon(1e-12));
        CHECK(r.face != doctest::Approx(r.full));
    }
    CHECK((1 * 0.3 + 1 * 0.6 + 1 * 0.9) / RoiLossWeights{}.z() == doctest::Approx(0.6));

    // whole-frame masks collapse the three regions
    auto whole = ex;
    whole.masks.body = DenseArray::full(ex.masks.body.shape(), 1.0);
    whole.masks.face = whole.masks.body;
    Tape tape(Precision::double_, false);
    ParamBinder bind(tape, params, nullptr, GradScope::none);
    auto r = flow_loss(bind, w.model, whole, {}, 0.6, eps);
    CHECK(r.body == doctest::Approx(r.full).epsilon(1e-12));
    CHECK(r.face == doctest::Approx(r.full).epsilon(1e-12));
    CHECK(r.total.value()[0] == doctest::Approx(r.full).epsilon(1e-12));
}

TEST_CASE("ROI weights sum to one and vanish on a perfect prediction") {
    World w;
    auto ex = w.example(1);
    DenseArray weights = roi_token_weights(w.model, ex.masks, {});
    double total = 0;
    for (double v : weights.data()) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    // squared error of an exact prediction is zero everywhere
    DenseArray zero_err(weights.shape(), Precision::double_);
    double loss = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) loss += weights[i] * zero_err[i];
    CHECK(loss == 0.0);

    auto no_face = ex;
    no_face.masks.face = DenseArray(ex.masks.face.shape(), Precision::double_);
    bool fallback = false;
    DenseArray fb = roi_token_weights(w.model, no_face.masks, {}, &fallback);
    CHECK(fallback);
    RoiMasks body_as_face{ex.masks.body, ex.masks.body};
    CHECK(max_abs_diff(fb, roi_token_weights(w.model, body_as_face, {})) < 1e-15);
}

TEST_CASE("gradient clipping arithmetic") {
    ParamMap g;
    g.emplace("a", DenseArray::matrix({{2.0, 0.0}}));
    CHECK(clip_gradients(g, 1.0) == doctest::Approx(2.0));
    CHECK(g.at("a")[0] == doctest::Approx(1.0));
    ParamMap small;
    small.emplace("a", DenseArray::matrix({{0.3, 0.4}}));
    clip_gradients(small, 1.0);
    CHECK(small.at("a")[1] == 0.4);
}

TEST_CASE("adapter learning rate is ten times the full rate") {
    World w;
    auto params = init_model(w.model, 5);
    auto ad = init_lora(w.model, params, 6);
    Trainer tr(w.model, w.train, params, ad);
    const std::string full = "head.mod", lora = LoraAdapter::a_name("blocks.0.mlp.fc1.w");
    ParamMap g;
    g.emplace(full, DenseArray::full(params.get(full).shape(), 1e-3));
    g.emplace(lora, DenseArray::full(ad.pair("blocks.0.mlp.fc1.w").a.shape(), 1e-3));
    const double before_full = tr.params().get(full)[0];
    const double before_lora = tr.adapter().pair("blocks.0.mlp.fc1.w").a[0];
    tr.apply_gradients(g);
    const double step_full = before_full - tr.params().get(full)[0];
    const double step_lora = before_lora - tr.adapter().pair("blocks.0.mlp.fc1.w").a[0];
    CHECK(step_lora / step_full == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(tr.lr_for(lora) == 10 * tr.lr_for(full));
}

TEST_CASE("a training step routes updates and leaves base weights untouched") {
    World w;
    auto params = init_model(w.model, 7);
    auto ad = init_lora(w.model, params, 8);
    Trainer tr(w.model, w.train, params, ad);
    auto m = tr.step({w.example(0), w.example(1, false)});
    CHECK_FALSE(m.aborted);
    CHECK(std::isfinite(m.loss));
    CHECK(m.grad_norm > 0);
    CHECK(m.dropped.size() == 2);
    for (const auto& name : params.names()) {
        const bool same = tr.params().get(name) == params.get(name);
        if (params.role(name) != ParamRole::full) CHECK_MESSAGE(same, name);
    }
    CHECK_FALSE(tr.params().get("head.out.w") == params.get("head.out.w"));
    CHECK_FALSE(tr.params().get("blocks.5.audio_gate") == params.get("blocks.5.audio_gate"));
    bool lora_moved = false;
    for (const auto& [name, pair] : ad.pairs()) lora_moved = lora_moved || !(tr.adapter().pair(name).b == pair.b);
    CHECK(lora_moved);
    CHECK(m.to_json().find("\"loss_face\"") != std::string::npos);
}

TEST_CASE("non-finite loss aborts the step and keeps the state") {
    World w;
    auto params = init_model(w.model, 9);
    auto ad = init_lora(w.model, params, 10);
    Trainer tr(w.model, w.train, params, ad);
    auto bad = w.example(0);
    bad.z0.grid.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
    auto m = tr.step({bad});
    CHECK(m.aborted);
    CHECK_FALSE(m.diagnostic.empty());
    for (const auto& name : params.names()) CHECK(tr.params().get(name) == params.get(name));
    CHECK_FALSE(tr.step({w.example(0)}).aborted);
}

TEST_CASE("repeated steps on a fixed batch reduce the loss") {
    World w;
    // two examples, so the batch-32 default rates overshoot
    w.train.lr_full = 2e-3;
    w.train.lr_lora = 2e-2;
    auto params = init_model(w.model, 11);
    Trainer tr(w.model, w.train, params, init_lora(w.model, params, 12));
    std::vector<TrainingExample> batch{w.example(0), w.example(1)};
    const double before = evaluate_loss(tr.params(), &tr.adapter(), w.model, batch, {}, 3);
    for (int i = 0; i < 60; ++i) tr.step(batch);
    CHECK(evaluate_loss(tr.params(), &tr.adapter(), w.model, batch, {}, 3) < 0.8 * before);
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.dropout_audio = 1.2;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = TrainConfig{};
    c.roi = {0, 0, 0};
    CHECK_THROWS_AS(validate(c), ConfigError);
}
