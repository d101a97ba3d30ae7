#pragma once

#include <functional>
#include <vector>

#include "wingen/dit.hpp"

namespace wingen {

/// Shifted flow timesteps, strictly decreasing, ending at 0.
struct SamplerSchedule {
    std::size_t steps = 50;
    double shift = 5.0;
    std::vector<double> timesteps;  // steps + 1 entries before truncation
};

double shift_timestep(double u, double shift);
SamplerSchedule build_schedule(std::size_t steps, double shift);
/// Keeps timesteps <= t_start. t_start = 0 leaves only the final 0 (no steps); a positive
/// t_start below the smallest positive timestep is an error.
SamplerSchedule truncate_schedule(const SamplerSchedule& s, double t_start);

enum class GuidanceMode { joint, split };

struct GuidanceConfig {
    double scale = 6.5;
    GuidanceMode mode = GuidanceMode::joint;
    // split mode: separate text and audio scales
    double text_scale = 6.5;
    double audio_scale = 6.5;
};

DenseArray cfg_velocity(const DenseArray& v_cond, const DenseArray& v_uncond, double scale);

/// Guided velocity in diffusion space for the current z at time t.
using VelocityFn = std::function<DenseArray(const DenseArray& z, double t)>;

struct SampleTrace {
    std::vector<double> evaluated;  // timesteps at which the model was queried
};

/// Euler integration z <- z + (t' - t) v(z, t) along the schedule.
DenseArray sample(DenseArray z, const SamplerSchedule& schedule, const VelocityFn& velocity, SampleTrace* trace = nullptr);

/// A DiT with fixed conditions, producing guided velocities.
struct GuidedModel {
    const ModelParams* params = nullptr;
    const LoraAdapter* adapter = nullptr;
    const ModelConfig* config = nullptr;
    const LatentVideo* context = nullptr;  // diffusion space; may be null
    const LatentVideo* reference = nullptr;
    const DenseArray* text = nullptr;
    const AudioWindow* audio = nullptr;
    GuidanceConfig guidance{};
    Triple stride{4, 16, 16};

    DenseArray operator()(const DenseArray& z, double t) const;
};

}  // namespace wingen
