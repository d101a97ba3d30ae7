#include "wingen/longvideo.hpp"

#include <cmath>
#include <iostream>

#include "json.hpp"

namespace wingen {

std::uint64_t WindowPlan::window_seed(std::size_t k) const {
    if (!seeds.empty()) {
        if (k >= seeds.size()) throw std::invalid_argument("window plan lists " + std::to_string(seeds.size()) + " seeds");
        return seeds[k];
    }
    return Rng(seed).fork(k).next_u64();
}

std::string WindowDiagnostics::to_json() const {
    return nlohmann::json{{"window", window}, {"drift_similarity", drift_similarity}, {"seed", seed}, {"t_start", t_start}}
        .dump();
}

LatentVideo run_window(const Generator& g, const GenerationConfig& gen, const WindowJob& job, SampleTrace* trace) {
    const ModelConfig& c = *g.config;
    const LatentCodec& codec = *g.codec;
    std::optional<LatentVideo> ctx;
    if (job.context && job.context->time() > 0) ctx = to_model_space(codec.encode(*job.context), c);
    const LatentVideo ref = to_model_space(codec.encode_image(job.reference), c);
    GuidedModel model{g.params, g.adapter, g.config, ctx ? &*ctx : nullptr, &ref, &job.text, job.audio, gen.guidance,
                      codec.config().stride};
    DenseArray z = sample(job.start.grid, job.schedule, model, trace);
    return from_model_space(LatentVideo{std::move(z), codec.config().stride}, c);
}

LongVideoResult generate_long(const Generator& g, const DenseArray& reference_image, const AudioTrack& audio,
                              const std::string& text, const WindowPlan& plan, const GenerationConfig& gen,
                              const Box* subject) {
    const ModelConfig& c = *g.config;
    const LatentCodec& codec = *g.codec;
    const Triple st = codec.config().stride;
    if (plan.windows == 0) throw std::invalid_argument("window plan needs at least one window");
    if (plan.context_frames > plan.video_frames)
        throw std::invalid_argument("context_frames must not exceed video_frames");
    if (reference_image.rank() != 3 || reference_image.dim(0) != 3)
        throw ShapeError("reference image must be [3,H,W], got " + shape_str(reference_image.shape()));
    const std::size_t need = plan.windows * plan.video_frames;
    const std::size_t have = audio.frame_count(plan.fps);
    if (have < need)
        throw std::invalid_argument("audio too short: plan needs " + std::to_string(need) + " frames, audio has " +
                                    std::to_string(have));
    const auto layers = extract_layers(audio, plan.fps);
    const DenseArray text_tokens = encode_text(text, c.text_tokens, c.text_dim);
    const SamplerSchedule schedule = build_schedule(gen.steps, gen.shift);
    const std::size_t H = reference_image.dim(1), W = reference_image.dim(2);
    const Shape latent_shape{plan.video_frames / st.t, c.latent_channels, H / st.h, W / st.w};
    if (plan.video_frames % st.t || plan.context_frames % st.t || H % st.h || W % st.w)
        throw ShapeError("window geometry not divisible by the codec stride");

    LongVideoResult out;
    for (std::size_t k = 0; k < plan.windows; ++k) {
        const std::uint64_t seed = plan.window_seed(k);
        Rng rng(seed);
        auto ov = plan.reference_overrides.find(k);
        const AudioWindow aw = audio_window(layers, static_cast<long>(k * plan.video_frames), plan.video_frames,
                                            c.audio.history());
        WindowJob job;
        job.reference = ov == plan.reference_overrides.end() ? reference_image : ov->second;
        job.audio = &aw;
        job.text = text_tokens;
        job.start = LatentVideo{rng.normal_array(latent_shape, Precision::double_), st};
        job.schedule = schedule;
        PixelVideo ctx;
        if (k > 0 && plan.context_frames > 0) {
            ctx = out.windows.back().slice(plan.video_frames - plan.context_frames, plan.video_frames);
            job.context = &ctx;
        }
        out.carried_context.push_back(ctx);
        LatentVideo z = run_window(g, gen, job);
        out.windows.push_back(codec.decode(z, plan.fps));
        out.diagnostics.push_back(WindowDiagnostics{k, 0.0, seed, schedule.timesteps.front()});
    }
    DriftCurve drift = drift_curve(out.windows, reference_image, codec, subject);
    for (std::size_t k = 0; k < plan.windows; ++k) out.diagnostics[k].drift_similarity = drift.similarity[k];
    out.video = PixelVideo::concat(out.windows);
    return out;
}

namespace {

std::vector<double> descriptor(const LatentVideo& z, const DenseArray& mask) {
    const std::size_t C = z.channels(), HW = z.height() * z.width();
    std::vector<double> d(C, 0.0);
    double n = 0;
    for (std::size_t t = 0; t < z.time(); ++t)
        for (std::size_t k = 0; k < HW; ++k) {
            if (mask[k] == 0) continue;
            n += 1;
            for (std::size_t ch = 0; ch < C; ++ch) d[ch] += z.grid[(t * C + ch) * HW + k];
        }
    if (n > 0)
        for (auto& v : d) v /= n;
    return d;
}

}  // namespace

DriftCurve drift_curve(const std::vector<PixelVideo>& windows, const DenseArray& reference_image,
                       const LatentCodec& codec, const Box* subject, DriftCentering centering) {
    if (windows.empty()) throw std::invalid_argument("drift_curve needs at least one window");
    const Triple st = codec.config().stride;
    const std::size_t H = reference_image.dim(1), W = reference_image.dim(2);
    DriftCurve out;
    DenseArray mask;
    if (subject && !subject->empty()) {
        mask = latent_mask(*subject, H, W, st);
    } else {
        std::cerr << "warning: no subject region, drift measured over the full frame\n";
        out.full_frame = true;
        mask = DenseArray::full({H / st.h, W / st.w}, 1.0);
    }
    std::vector<double> origin;
    if (centering == DriftCentering::neutral_gray)
        origin = descriptor(codec.encode_image(DenseArray::full({3, H, W}, 0.5)), mask);
    auto centered = [&](std::vector<double> d) {
        for (std::size_t i = 0; i < origin.size(); ++i) d[i] -= origin[i];
        return d;
    };
    const auto ref = centered(descriptor(codec.encode_image(reference_image), mask));
    // relative to the gray descriptor's scale, so rounding in a gray window stays degenerate
    double floor = 0;
    for (double v : origin) floor += v * v;
    floor *= 1e-24;
    for (const auto& w : windows) {
        const auto d = centered(descriptor(codec.encode(w), mask));
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            dot += d[i] * ref[i];
            na += d[i] * d[i];
            nb += ref[i] * ref[i];
        }
        const bool degenerate = na <= floor || nb <= floor;
        out.degenerate.push_back(degenerate);
        out.similarity.push_back(degenerate ? 0.0 : dot / std::sqrt(na * nb));
    }
    return out;
}

}  // namespace wingen
