#include "wingen/sampler.hpp"

#include <algorithm>

namespace wingen {

double shift_timestep(double u, double shift) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return shift * u / (1.0 + (shift - 1.0) * u);
}

SamplerSchedule build_schedule(std::size_t steps, double shift) {
    if (steps == 0) throw std::invalid_argument("sampler needs at least one step");
    if (!(shift > 0)) throw std::invalid_argument("shift must be positive");
    SamplerSchedule s{steps, shift, {}};
    for (std::size_t i = 0; i <= steps; ++i) {
        const double u = 1.0 - static_cast<double>(i) / static_cast<double>(steps);
        s.timesteps.push_back(i == steps ? 0.0 : shift_timestep(u, shift));
    }
    return s;
}

SamplerSchedule truncate_schedule(const SamplerSchedule& s, double t_start) {
    if (!(t_start >= 0.0 && t_start <= 1.0)) throw std::invalid_argument("t_start outside [0,1]");
    SamplerSchedule out{s.steps, s.shift, {}};
    for (double t : s.timesteps)
        if (t <= t_start) out.timesteps.push_back(t);
    if (out.timesteps.empty() || (t_start > 0.0 && out.timesteps.size() == 1))
        throw std::invalid_argument("t_start below smallest timestep (" + std::to_string(t_start) + ")");
    return out;
}

DenseArray cfg_velocity(const DenseArray& v_cond, const DenseArray& v_uncond, double scale) {
    if (v_cond.shape() != v_uncond.shape())
        throw ShapeError("guidance branches disagree: " + shape_str(v_cond.shape()) + " vs " + shape_str(v_uncond.shape()));
    if (scale < 0) throw std::invalid_argument("guidance scale must be >= 0");
    return add(v_uncond, scaled(sub(v_cond, v_uncond), scale));
}

DenseArray sample(DenseArray z, const SamplerSchedule& schedule, const VelocityFn& velocity, SampleTrace* trace) {
    const auto& ts = schedule.timesteps;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        DenseArray v = velocity(z, ts[i]);
        if (trace) trace->evaluated.push_back(ts[i]);
        z = add(z, scaled(v, ts[i + 1] - ts[i]));
    }
    return z;
}

DenseArray GuidedModel::operator()(const DenseArray& z, double t) const {
    LatentVideo video{z, stride};
    const ModelConfig& c = *config;
    const DenseArray null_text(text->shape(), text->precision());
    auto branch = [&](bool with_text, bool with_audio) {
        DitInput in;
        in.context = context;
        in.video = &video;
        in.reference = reference;
        in.text = with_text ? text : &null_text;
        in.audio = audio;
        in.audio_null = !with_audio;
        in.t = t;
        return predict_velocity(*params, adapter, c, in).grid;
    };
    if (guidance.mode == GuidanceMode::joint) {
        DenseArray vc = branch(true, true);
        if (guidance.scale == 1.0) return vc;
        return cfg_velocity(vc, branch(false, false), guidance.scale);
    }
    DenseArray v_none = branch(false, false), v_text = branch(true, false), v_full = branch(true, true);
    return add(cfg_velocity(v_text, v_none, guidance.text_scale), scaled(sub(v_full, v_text), guidance.audio_scale));
}

}  // namespace wingen
