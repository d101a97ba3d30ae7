#pragma once

#include "wingen/longvideo.hpp"

namespace wingen {

struct DubbingConfig {
    double alpha = 0.95;
    std::size_t segment_frames = 16;
    std::size_t context_frames = 12;
    std::uint64_t seed = 11;
};

/// (1 - alpha) z0 + alpha eps with eps standard normal from `rng`.
LatentVideo noise_inject(const LatentVideo& z0, double alpha, Rng& rng);

struct DubResult {
    PixelVideo video;
    std::vector<std::size_t> reference_frames;  // absolute frame index per segment
    std::vector<std::size_t> steps;             // denoising steps per segment
    std::vector<double> evaluated;              // every timestep the model was queried at
};

/// Re-generates `input` driven by `audio`, keeping input structure in proportion to 1 - alpha.
DubResult dub(const Generator& g, const PixelVideo& input, const AudioTrack& audio, const std::string& text,
              const DubbingConfig& cfg, const GenerationConfig& gen);

}  // namespace wingen
