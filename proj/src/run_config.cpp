#include "wingen/run_config.hpp"

namespace wingen {

using nlohmann::json;

namespace {

json triple(const Triple& t) { return json::array({t.t, t.h, t.w}); }

Triple get_triple(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() != 3) throw ConfigKeyError(key, key + " must be a 3-element array");
    return Triple{j[0].get<std::size_t>(), j[1].get<std::size_t>(), j[2].get<std::size_t>()};
}

const char* gate_name(GateMode m) { return m == GateMode::scalar ? "scalar" : "matrix"; }

// Rejects keys absent from `defaults` and values whose JSON type differs from the default's.
void check_keys(const json& user, const json& defaults, const std::string& path) {
    if (!user.is_object()) throw ConfigKeyError(path, (path.empty() ? "config" : path) + " must be an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!defaults.contains(it.key())) throw ConfigKeyError(key, "unknown config key '" + key + "'");
        const json& d = defaults[it.key()];
        const json& v = it.value();
        if (d.is_object()) {
            check_keys(v, d, key);
            continue;
        }
        const bool ok = (d.is_number() && v.is_number()) || (d.is_string() && v.is_string()) ||
                        (d.is_boolean() && v.is_boolean()) || (d.is_array() && v.is_array());
        if (!ok) throw ConfigKeyError(key, "config key '" + key + "' has the wrong type (expected " + d.type_name() + ")");
        if (d.is_number_unsigned() && v.is_number_integer() && v.get<long long>() < 0)
            throw ConfigKeyError(key, "config key '" + key + "' must be non-negative");
        if (d.is_number_integer() && v.is_number_float())
            throw ConfigKeyError(key, "config key '" + key + "' must be an integer");
    }
}

}  // namespace

RunConfig RunConfig::from_preset(const std::string& name) {
    RunConfig rc;
    rc.preset = name;
    if (name == "desk") return rc;
    if (name != "full_scale") throw ConfigKeyError("preset", "unknown preset '" + name + "'");
    rc.model = ModelConfig::full_scale();
    rc.codec.latent_channels = rc.model.latent_channels;
    rc.train = TrainConfig::full_scale();
    rc.window.video_frames = rc.train.video_frames;
    rc.window.context_frames = rc.train.context_frames;
    rc.dubbing.segment_frames = rc.train.video_frames;
    rc.dubbing.context_frames = rc.train.context_frames;
    rc.generation.steps = 50;
    return rc;
}

json to_json(const RunConfig& rc) {
    const ModelConfig& m = rc.model;
    json pack = json::array();
    for (const auto& b : m.pack_plan.buckets) pack.push_back({{"frames", b.frames}, {"patch", triple(b.patch)}});
    const TrainConfig& t = rc.train;
    return json{
        {"preset", rc.preset},
        {"model",
         {{"latent_channels", m.latent_channels},
          {"patch", triple(m.patch)},
          {"model_dim", m.model_dim},
          {"blocks", m.blocks},
          {"heads", m.heads},
          {"mlp_dim", m.mlp_dim},
          {"freq_dim", m.freq_dim},
          {"text_dim", m.text_dim},
          {"text_tokens", m.text_tokens},
          {"audio_bands", m.audio_bands},
          {"audio_layers", m.audio_layers},
          {"audio",
           {{"audio_dim", m.audio.audio_dim},
            {"tokens_per_latent", m.audio.tokens_per_latent},
            {"stride_t", m.audio.stride_t},
            {"kernel", m.audio.kernel}}},
          {"audio_blocks", m.audio_blocks},
          {"gate", gate_name(m.gate_mode)},
          {"ref_offset", m.ref_offset},
          {"lora_rank", m.lora_rank},
          {"lora_alpha", m.lora_alpha},
          {"pack_plan", pack},
          {"latent_dc_mean", m.latent_dc_mean},
          {"latent_std", m.latent_std}}},
        {"codec", {{"stride", triple(rc.codec.stride)}, {"latent_channels", rc.codec.latent_channels}, {"seed", rc.codec.seed}}},
        {"sampler", {{"steps", rc.generation.steps}, {"shift", rc.generation.shift}}},
        {"guidance",
         {{"scale", rc.generation.guidance.scale},
          {"mode", rc.generation.guidance.mode == GuidanceMode::joint ? "joint" : "split"},
          {"text_scale", rc.generation.guidance.text_scale},
          {"audio_scale", rc.generation.guidance.audio_scale}}},
        {"train",
         {{"lr_full", t.lr_full},
          {"lr_lora", t.lr_lora},
          {"weight_decay", t.weight_decay},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"adam_eps", t.adam_eps},
          {"dropout_text", t.dropout_text},
          {"dropout_image", t.dropout_image},
          {"dropout_audio", t.dropout_audio},
          {"context_frames", t.context_frames},
          {"video_frames", t.video_frames},
          {"grad_clip", t.grad_clip},
          {"batch", t.batch},
          {"steps", t.steps},
          {"shift", t.shift},
          {"roi", {{"full", t.roi.full}, {"body", t.roi.body}, {"face", t.roi.face}}},
          {"seed", t.seed}}},
        {"window",
         {{"windows", rc.window.windows},
          {"video_frames", rc.window.video_frames},
          {"context_frames", rc.window.context_frames},
          {"seed", rc.window.seed},
          {"seeds", rc.window.seeds},
          {"fps", rc.window.fps}}},
        {"dubbing",
         {{"alpha", rc.dubbing.alpha},
          {"segment_frames", rc.dubbing.segment_frames},
          {"context_frames", rc.dubbing.context_frames},
          {"seed", rc.dubbing.seed}}},
        {"director",
         {{"url", rc.director.url},
          {"model", rc.director.model},
          {"token_env", rc.director.token_env},
          {"timeout_ms", rc.director.timeout_ms}}},
        {"fixtures",
         {{"count", rc.fixtures.count},
          {"frames", rc.fixtures.frames},
          {"seed", rc.fixtures.seed},
          {"eval_batch", rc.fixtures.eval_batch}}},
        {"seeds", {{"init", rc.seeds.init}, {"adapter", rc.seeds.adapter}, {"batches", rc.seeds.batches}}},
        {"paths", {{"out", rc.out}}},
    };
}

RunConfig parse_run_config(const json& user) {
    if (!user.is_object()) throw ConfigKeyError("", "config must be a JSON object");
    std::string preset = "desk";
    if (user.contains("preset")) {
        if (!user["preset"].is_string()) throw ConfigKeyError("preset", "preset must be a string");
        preset = user["preset"].get<std::string>();
    }
    RunConfig rc = RunConfig::from_preset(preset);
    const json defaults = to_json(rc);
    check_keys(user, defaults, "");
    json j = defaults;
    j.merge_patch(user);

    std::string at;
    try {
        const json& m = j["model"];
        ModelConfig& mc = rc.model;
        at = "model";
        mc.latent_channels = m["latent_channels"];
        mc.patch = get_triple(m["patch"], "model.patch");
        mc.model_dim = m["model_dim"];
        mc.blocks = m["blocks"];
        mc.heads = m["heads"];
        mc.mlp_dim = m["mlp_dim"];
        mc.freq_dim = m["freq_dim"];
        mc.text_dim = m["text_dim"];
        mc.text_tokens = m["text_tokens"];
        mc.audio_bands = m["audio_bands"];
        mc.audio_layers = m["audio_layers"];
        mc.audio.audio_dim = m["audio"]["audio_dim"];
        mc.audio.tokens_per_latent = m["audio"]["tokens_per_latent"];
        mc.audio.stride_t = m["audio"]["stride_t"];
        mc.audio.kernel = m["audio"]["kernel"];
        at = "model.audio_blocks";
        mc.audio_blocks = m["audio_blocks"].get<std::vector<std::size_t>>();
        at = "model.gate";
        const std::string gate = m["gate"];
        if (gate != "scalar" && gate != "matrix") throw ConfigKeyError(at, "model.gate must be 'scalar' or 'matrix'");
        mc.gate_mode = gate == "scalar" ? GateMode::scalar : GateMode::matrix;
        at = "model";
        mc.ref_offset = m["ref_offset"];
        mc.lora_rank = m["lora_rank"];
        mc.lora_alpha = m["lora_alpha"];
        at = "model.pack_plan";
        mc.pack_plan.buckets.clear();
        for (const auto& b : m["pack_plan"])
            mc.pack_plan.buckets.push_back(PackBucket{b.at("frames").get<std::size_t>(), get_triple(b.at("patch"), at)});
        at = "model";
        mc.latent_dc_mean = m["latent_dc_mean"];
        mc.latent_std = m["latent_std"];

        at = "codec";
        rc.codec.stride = get_triple(j["codec"]["stride"], "codec.stride");
        rc.codec.latent_channels = j["codec"]["latent_channels"];
        rc.codec.seed = j["codec"]["seed"];

        at = "sampler";
        rc.generation.steps = j["sampler"]["steps"];
        rc.generation.shift = j["sampler"]["shift"];
        at = "guidance";
        const json& g = j["guidance"];
        rc.generation.guidance.scale = g["scale"];
        const std::string mode = g["mode"];
        if (mode != "joint" && mode != "split") throw ConfigKeyError("guidance.mode", "guidance.mode must be 'joint' or 'split'");
        rc.generation.guidance.mode = mode == "joint" ? GuidanceMode::joint : GuidanceMode::split;
        rc.generation.guidance.text_scale = g["text_scale"];
        rc.generation.guidance.audio_scale = g["audio_scale"];

        at = "train";
        const json& t = j["train"];
        TrainConfig& tc = rc.train;
        tc.lr_full = t["lr_full"];
        tc.lr_lora = t["lr_lora"];
        tc.weight_decay = t["weight_decay"];
        tc.beta1 = t["beta1"];
        tc.beta2 = t["beta2"];
        tc.adam_eps = t["adam_eps"];
        tc.dropout_text = t["dropout_text"];
        tc.dropout_image = t["dropout_image"];
        tc.dropout_audio = t["dropout_audio"];
        tc.context_frames = t["context_frames"];
        tc.video_frames = t["video_frames"];
        tc.grad_clip = t["grad_clip"];
        tc.batch = t["batch"];
        tc.steps = t["steps"];
        tc.shift = t["shift"];
        tc.roi = RoiLossWeights{t["roi"]["full"], t["roi"]["body"], t["roi"]["face"]};
        tc.seed = t["seed"];

        at = "window";
        const json& w = j["window"];
        rc.window.windows = w["windows"];
        rc.window.video_frames = w["video_frames"];
        rc.window.context_frames = w["context_frames"];
        rc.window.seed = w["seed"];
        rc.window.seeds = w["seeds"].get<std::vector<std::uint64_t>>();
        rc.window.fps = w["fps"];

        at = "dubbing";
        rc.dubbing.alpha = j["dubbing"]["alpha"];
        rc.dubbing.segment_frames = j["dubbing"]["segment_frames"];
        rc.dubbing.context_frames = j["dubbing"]["context_frames"];
        rc.dubbing.seed = j["dubbing"]["seed"];

        at = "director";
        rc.director.url = j["director"]["url"];
        rc.director.model = j["director"]["model"];
        rc.director.token_env = j["director"]["token_env"];
        rc.director.timeout_ms = j["director"]["timeout_ms"];

        at = "fixtures";
        rc.fixtures.count = j["fixtures"]["count"];
        rc.fixtures.frames = j["fixtures"]["frames"];
        rc.fixtures.seed = j["fixtures"]["seed"];
        rc.fixtures.eval_batch = j["fixtures"]["eval_batch"];

        at = "seeds";
        rc.seeds.init = j["seeds"]["init"];
        rc.seeds.adapter = j["seeds"]["adapter"];
        rc.seeds.batches = j["seeds"]["batches"];
        at = "paths.out";
        rc.out = j["paths"]["out"];
    } catch (const json::exception& e) {
        throw ConfigKeyError(at, "bad value under '" + at + "': " + e.what());
    }
    validate(rc);
    return rc;
}

void validate(const RunConfig& rc) {
    validate(rc.model);
    validate(rc.train);
    if (rc.codec.latent_channels != rc.model.latent_channels)
        throw ConfigKeyError("codec.latent_channels", "codec.latent_channels must equal model.latent_channels");
    const Triple& st = rc.codec.stride;
    auto frames = [&](std::size_t n, const std::string& key) {
        if (n == 0 || n % st.t) throw ConfigKeyError(key, key + " must be a positive multiple of codec.stride[0]");
    };
    frames(rc.train.video_frames, "train.video_frames");
    frames(rc.window.video_frames, "window.video_frames");
    frames(rc.dubbing.segment_frames, "dubbing.segment_frames");
    if (rc.train.context_frames % st.t) throw ConfigKeyError("train.context_frames", "train.context_frames must be a multiple of codec.stride[0]");
    if (rc.window.context_frames > rc.window.video_frames)
        throw ConfigKeyError("window.context_frames", "window.context_frames exceeds window.video_frames");
    if (rc.window.windows == 0) throw ConfigKeyError("window.windows", "window.windows must be positive");
    if (!(rc.dubbing.alpha >= 0.0 && rc.dubbing.alpha <= 1.0)) throw ConfigKeyError("dubbing.alpha", "dubbing.alpha must lie in [0,1]");
    if (rc.generation.steps == 0) throw ConfigKeyError("sampler.steps", "sampler.steps must be positive");
    if (!(rc.generation.shift > 0)) throw ConfigKeyError("sampler.shift", "sampler.shift must be positive");
    if (!(rc.window.fps > 0)) throw ConfigKeyError("window.fps", "window.fps must be positive");
    if (rc.fixtures.count == 0) throw ConfigKeyError("fixtures.count", "fixtures.count must be positive");
}

std::uint64_t model_digest(const RunConfig& rc) {
    const json j = to_json(rc);
    return fnv1a64(j["codec"].dump(), fnv1a64(j["model"].dump()));
}

std::vector<FixtureRecord> standard_fixtures(const FixtureSetConfig& fc) {
    std::vector<FixtureRecord> pool;
    for (std::size_t i = 0; i < fc.count; ++i) {
        FixtureSpec s;
        s.seed = fc.seed + i;
        s.frames = fc.frames;
        pool.push_back(make_fixture(s));
    }
    return pool;
}

TrainingOutcome train_standard(const RunConfig& rc, ModelParams& params, LoraAdapter& adapter,
                               const std::function<void(const StepMetrics&)>& on_step) {
    const LatentCodec codec(rc.codec);
    const auto pool = standard_fixtures(rc.fixtures);
    std::vector<std::vector<DenseArray>> layers;
    for (const auto& fx : pool) layers.push_back(extract_layers(fx.audio, fx.video.fps));

    Rng eval_rng = Rng(rc.seeds.batches).fork(0xE7A1);
    const auto eval_batch = sample_batch(pool, layers, codec, rc.model, rc.train, rc.fixtures.eval_batch, eval_rng);
    const std::uint64_t eval_seed = rc.seeds.batches ^ 0xE7A1;

    TrainingOutcome out;
    out.initial_eval_loss = evaluate_loss(params, &adapter, rc.model, eval_batch, rc.train.roi, eval_seed);
    Trainer trainer(rc.model, rc.train, std::move(params), std::move(adapter));
    Rng rng(rc.seeds.batches);
    for (std::size_t s = 0; s < rc.train.steps; ++s) {
        auto batch = sample_batch(pool, layers, codec, rc.model, rc.train, rc.train.batch, rng);
        StepMetrics m = trainer.step(batch);
        if (on_step) on_step(m);
        out.steps.push_back(std::move(m));
    }
    params = trainer.params();
    adapter = trainer.adapter();
    out.final_eval_loss = evaluate_loss(params, &adapter, rc.model, eval_batch, rc.train.roi, eval_seed);
    return out;
}

}  // namespace wingen
