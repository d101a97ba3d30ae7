#include "probe.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "wingen/ops.hpp"
#include "wingen/run_config.hpp"

using namespace wingen;

namespace {

struct Check {
    const char* name;
    std::function<std::string()> run;  // empty string on success
};

std::string fail_if(bool bad, const std::string& why) { return bad ? why : std::string(); }

LatentVideo random_latent(Rng& rng, std::size_t T, std::size_t C = 16) {
    return LatentVideo{rng.normal_array({T, C, 4, 4}, Precision::double_), {4, 16, 16}};
}

std::vector<Check> checks() {
    return {
        {"numerics: tape gradients match central differences",
         [] {
             Rng rng(1);
             ParamMap p{{"w", rng.normal_array({3, 4}, Precision::double_)}, {"x", rng.normal_array({2, 3}, Precision::double_)}};
             auto loss = [](const ParamMap& m, bool want) {
                 Tape tape(Precision::double_);
                 Var w = tape.param("w", m.at("w")), x = tape.param("x", m.at("x"));
                 Var y = ops::sum(ops::square(ops::silu(ops::matmul(x, w))));
                 LossAndGrad r{y.value()[0], {}};
                 if (want) {
                     tape.backward(y);
                     for (const char* k : {"w", "x"}) r.grads.emplace(k, *tape.param_grad(k));
                 }
                 return r;
             };
             GradCheckOptions opt;
             opt.epsilon = 1e-5;
             opt.samples_per_param = 6;
             opt.abs_floor = 1e-3;
             auto rep = finite_diff_check(loss, p, opt);
             return fail_if(!rep.passed, "max rel error " + std::to_string(rep.max_rel_error));
         }},
        {"latent_codec: full-channel round trip is exact to 1e-9",
         [] {
             CodecConfig cc;
             cc.latent_channels = 3 * cc.stride.volume();
             LatentCodec codec(cc);
             Rng rng(2);
             PixelVideo v{rng.normal_array({4, 3, 16, 16}, Precision::double_), 25.0};
             return fail_if(max_abs_diff(codec.decode(codec.encode(v)).frames, v.frames) > 1e-9, "round trip error");
         }},
        {"latent_codec: stride (4,8,8) gives 4x the tokens of (4,16,16)",
         [] {
             const auto a = token_count(80, 704, 1280, {4, 8, 8}, {1, 2, 2});
             const auto b = token_count(80, 704, 1280, {4, 16, 16}, {1, 2, 2});
             return fail_if(a != 4 * b, std::to_string(a) + " vs " + std::to_string(b));
         }},
        {"audio_features: window before the track is zero padded",
         [] {
             FixtureSpec s;
             s.frames = 16;
             auto layers = extract_layers(make_fixture(s).audio, 25.0);
             auto w = audio_window(layers, 0, 16, 8);
             double head = 0;
             for (std::size_t i = 0; i < 8 * w.layers[0].dim(1); ++i) head += std::abs(w.layers[0][i]);
             return fail_if(head != 0.0, "history before frame 0 is not zero");
         }},
        {"dit_core: reference position and video range",
         [] {
             Rng rng(3);
             for (int i = 0; i < 20; ++i) {
                 const std::size_t tv = 1 + rng.below(6);
                 const int off = 1 + static_cast<int>(rng.below(12));
                 auto pos = reference_positions(tv, 4, 4, {1, 2, 2}, off);
                 for (std::size_t k = 0; k < pos.size(); ++k)
                     if (pos.pos[k].t != static_cast<int>(tv) - 1 + off) return std::string("reference t_pos wrong");
                 auto vid = video_positions(tv, 4, 4, {1, 2, 2});
                 for (std::size_t k = 0; k < vid.size(); ++k)
                     if (vid.pos[k].t < 0 || vid.pos[k].t >= static_cast<int>(tv)) return std::string("video t_pos out of range");
             }
             return std::string();
         }},
        {"dit_core: closed audio gates ignore audio",
         [] {
             ModelConfig c;
             auto p = init_model(c, 4);
             Rng rng(5);
             LatentVideo ctx = random_latent(rng, 3), vid = random_latent(rng, 4), ref = random_latent(rng, 1);
             DenseArray text = encode_text("a person talking", c.text_tokens, c.text_dim);
             std::vector<DenseArray> layers;
             for (int l = 0; l < 3; ++l) layers.push_back(rng.normal_array({16, 8}, Precision::double_));
             AudioWindow aw = audio_window(layers, 0, 16, c.audio.history());
             DitInput in{&ctx, &vid, &ref, &text, &aw, false, 0.5};
             DenseArray a = predict_velocity(p, nullptr, c, in).grid;
             in.audio_null = true;
             return fail_if(!(a == predict_velocity(p, nullptr, c, in).grid), "outputs differ");
         }},
        {"framepack: packed token count matches the bucket arithmetic",
         [] {
             PackPlan plan;
             const auto n = packed_token_count({3, 16, 4, 4}, plan);
             // newest latent at (1,2,2): 4 tokens; two older at (2,4,4): 1 token
             return fail_if(n != 5, "got " + std::to_string(n));
         }},
        {"sampler: schedule endpoints and Euler exactness",
         [] {
             auto s = build_schedule(50, 5.0);
             if (s.timesteps.front() != 1.0 || s.timesteps.back() != 0.0) return std::string("endpoints");
             Rng rng(6);
             DenseArray z0 = rng.normal_array({8}, Precision::double_), eps = rng.normal_array({8}, Precision::double_);
             const DenseArray v = sub(eps, z0);
             DenseArray out = sample(eps, s, [&](const DenseArray&, double) { return v; });
             return fail_if(max_abs_diff(out, z0) > 1e-9, "Euler drifted");
         }},
        {"trainer: roles partition the parameters; dropout rate near 0.1",
         [] {
             ModelConfig c;
             auto p = init_model(c, 7);
             const auto n = p.names_with_role(ParamRole::frozen).size() + p.names_with_role(ParamRole::full).size() +
                            p.names_with_role(ParamRole::lora_target).size();
             if (n != p.names().size()) return std::string("roles do not partition");
             Rng rng(8);
             int drops = 0;
             for (int i = 0; i < 10000; ++i) drops += apply_condition_dropout({0.1, 0.1, 0.1}, rng).text;
             return fail_if(drops < 800 || drops > 1200, "text drop count " + std::to_string(drops));
         }},
        {"longvideo: carried context equals the previous tail",
         [] {
             ModelConfig c;
             LatentCodec codec{CodecConfig{}};
             auto p = init_model(c, 9);
             auto ad = init_lora(c, p, 10);
             FixtureSpec s;
             s.frames = 32;
             auto fx = make_fixture(s);
             WindowPlan plan;
             plan.windows = 2;
             GenerationConfig gen;
             gen.steps = 2;
             auto r = generate_long({&p, &ad, &c, &codec}, fx.video.slice(0, 1).frames.reshaped({3, 64, 64}), fx.audio,
                                    fx.prompt, plan, gen, &fx.body);
             return fail_if(!(r.carried_context[1].frames == r.windows[0].slice(4, 16).frames), "carry mismatch");
         }},
        {"dubbing: noise injection endpoints",
         [] {
             Rng rng(11);
             LatentVideo z = random_latent(rng, 2);
             Rng a(3), b(3), e(3);
             if (!(noise_inject(z, 0.0, a).grid == z.grid)) return std::string("alpha 0");
             return fail_if(!(noise_inject(z, 1.0, b).grid == e.normal_array(z.grid.shape(), Precision::double_)), "alpha 1");
         }},
        {"synth_world: constructed 2-frame delay is recovered",
         [] {
             FixtureSpec s;
             s.frames = 96;
             s.audio_delay = 2;
             auto fx = make_fixture(s);
             auto off = sync_offset(fx.video, fx.audio, fx.mouth);
             return fail_if(off.offset != 2, "offset " + std::to_string(off.offset));
         }},
        {"director_client: fallback is deterministic and user-first",
         [] {
             DirectorRequest r;
             r.user_prompt = "sad scene";
             r.audio.emotion = "joyful";
             auto a = fallback_storyline(r), b = fallback_storyline(r);
             const auto& e = a.section("emotional shifts");
             return fail_if(a.to_text() != b.to_text() || e.find("sad scene") > e.find("joyful"), "ordering");
         }},
        {"cli: checkpoint round trip is bit-exact; unknown keys rejected",
         [] {
             ModelConfig c;
             auto p = init_model(c, 12);
             auto ad = init_lora(c, p, 13);
             auto ck = make_checkpoint(p, &ad, 42);
             auto back = deserialize_checkpoint(serialize_checkpoint(ck));
             if (back.tensors != ck.tensors || back.config_digest != 42) return std::string("round trip");
             try {
                 parse_run_config(nlohmann::json{{"train", {{"lr", 1}}}});
                 return std::string("unknown key accepted");
             } catch (const ConfigKeyError& e) {
                 return fail_if(e.key != "train.lr", "wrong key " + e.key);
             }
         }},
    };
}

}  // namespace

bool run_probe(std::ostream& out) {
    std::size_t failed = 0;
    for (const auto& c : checks()) {
        std::string why;
        try {
            why = c.run();
        } catch (const std::exception& e) {
            why = std::string("threw: ") + e.what();
        }
        out << (why.empty() ? "PASS " : "FAIL ") << c.name << (why.empty() ? "" : " (" + why + ")") << "\n";
        if (!why.empty()) ++failed;
    }
    out << (failed ? std::to_string(failed) + " check(s) failed" : std::string("all checks passed")) << "\n";
    return failed == 0;
}
