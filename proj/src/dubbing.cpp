#include "wingen/dubbing.hpp"

namespace wingen {

LatentVideo noise_inject(const LatentVideo& z0, double alpha, Rng& rng) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha outside [0,1]: " + std::to_string(alpha));
    const DenseArray eps = rng.normal_array(z0.grid.shape(), z0.grid.precision());
    return LatentVideo{add(scaled(z0.grid, 1.0 - alpha), scaled(eps, alpha)), z0.stride};
}

DubResult dub(const Generator& g, const PixelVideo& input, const AudioTrack& audio, const std::string& text,
              const DubbingConfig& cfg, const GenerationConfig& gen) {
    const ModelConfig& c = *g.config;
    const LatentCodec& codec = *g.codec;
    const std::size_t seg = cfg.segment_frames, T = input.time();
    if (seg == 0 || T == 0 || T % seg)
        throw std::invalid_argument("input of " + std::to_string(T) + " frames is not a whole number of " +
                                    std::to_string(seg) + "-frame segments");
    if (cfg.context_frames > seg) throw std::invalid_argument("context_frames must not exceed segment_frames");
    if (audio.frame_count(input.fps) < T)
        throw std::invalid_argument("audio covers " + std::to_string(audio.frame_count(input.fps)) + " frames, video has " +
                                    std::to_string(T));
    const SamplerSchedule schedule = truncate_schedule(build_schedule(gen.steps, gen.shift), cfg.alpha);
    const auto layers = extract_layers(audio, input.fps);
    const DenseArray text_tokens = encode_text(text, c.text_tokens, c.text_dim);

    DubResult out;
    std::vector<PixelVideo> parts;
    for (std::size_t k = 0; k * seg < T; ++k) {
        const std::size_t f0 = k * seg;
        const PixelVideo segment = input.slice(f0, f0 + seg);
        const LatentVideo z0 = codec.encode(segment);
        Rng root = Rng(cfg.seed).fork(k);
        Rng pick = root.fork(1), noise = root.fork(2);
        const std::size_t ref_frame = f0 + pick.below(seg);
        out.reference_frames.push_back(ref_frame);
        out.steps.push_back(schedule.timesteps.size() - 1);

        LatentVideo z = z0;
        if (schedule.timesteps.size() > 1) {
            const AudioWindow aw = audio_window(layers, static_cast<long>(f0), seg, c.audio.history());
            PixelVideo ctx;
            WindowJob job;
            if (k > 0 && cfg.context_frames > 0) {
                ctx = parts.back().slice(seg - cfg.context_frames, seg);
                job.context = &ctx;
            }
            const PixelVideo rf = input.slice(ref_frame, ref_frame + 1);
            job.reference = rf.frames.reshaped({3, rf.height(), rf.width()});
            job.audio = &aw;
            job.text = text_tokens;
            job.start = noise_inject(to_model_space(z0, c), cfg.alpha, noise);
            job.schedule = schedule;
            SampleTrace trace;
            z = run_window(g, gen, job, &trace);
            out.evaluated.insert(out.evaluated.end(), trace.evaluated.begin(), trace.evaluated.end());
        }
        // with zero denoising steps the encoded latent is decoded untouched
        parts.push_back(codec.decode(z, input.fps));
    }
    out.video = PixelVideo::concat(parts);
    return out;
}

}  // namespace wingen
