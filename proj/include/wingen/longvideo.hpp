#pragma once

#include <map>
#include <string>
#include <vector>

#include "wingen/rng.hpp"
#include "wingen/sampler.hpp"
#include "wingen/synth.hpp"

namespace wingen {

/// Model, adapter and codec shared by every window.
struct Generator {
    const ModelParams* params = nullptr;
    const LoraAdapter* adapter = nullptr;
    const ModelConfig* config = nullptr;
    const LatentCodec* codec = nullptr;
};

struct GenerationConfig {
    std::size_t steps = 50;
    double shift = 5.0;
    GuidanceConfig guidance{};
};

struct WindowPlan {
    std::size_t windows = 1;
    std::size_t video_frames = 16;
    std::size_t context_frames = 12;
    std::uint64_t seed = 7;
    std::vector<std::uint64_t> seeds;  // per window; empty -> derived from `seed`
    std::map<std::size_t, DenseArray> reference_overrides;  // window -> [3,H,W] image
    double fps = 25.0;

    std::uint64_t window_seed(std::size_t k) const;
    double output_seconds() const { return static_cast<double>(windows * video_frames) / fps; }
};

struct WindowDiagnostics {
    std::size_t window = 0;
    double drift_similarity = 0;
    std::uint64_t seed = 0;
    double t_start = 1.0;
    std::string to_json() const;
};

struct LongVideoResult {
    PixelVideo video;
    std::vector<PixelVideo> windows;
    std::vector<PixelVideo> carried_context;  // context pixels fed to window k (empty for k = 0)
    std::vector<WindowDiagnostics> diagnostics;
};

/// One window: optional pixel context, reference image, aligned audio, and the starting
/// latent in diffusion space at schedule.timesteps.front().
struct WindowJob {
    const PixelVideo* context = nullptr;
    DenseArray reference;  // [3,H,W]
    const AudioWindow* audio = nullptr;
    DenseArray text;
    LatentVideo start;
    SamplerSchedule schedule;
};

/// Denoises one window and decodes it; the latent is returned in codec space.
LatentVideo run_window(const Generator& g, const GenerationConfig& gen, const WindowJob& job, SampleTrace* trace = nullptr);

/// Audio-driven sliding-window generation with pixel-space context carry.
LongVideoResult generate_long(const Generator& g, const DenseArray& reference_image, const AudioTrack& audio,
                              const std::string& text, const WindowPlan& plan, const GenerationConfig& gen,
                              const Box* subject = nullptr);

struct DriftCurve {
    std::vector<double> similarity;
    bool full_frame = false;  // no subject region given
    std::vector<bool> degenerate;
};

// neutral_gray subtracts the descriptor of a mid-gray frame before the cosine. Without it
// the shared positive DC term keeps every plausible image near 1.
enum class DriftCentering { none, neutral_gray };

/// Cosine similarity of the subject-region mean latent of each window against the
/// reference image's. A zero (or, when centered, mid-gray) descriptor scores 0 and is flagged.
DriftCurve drift_curve(const std::vector<PixelVideo>& windows, const DenseArray& reference_image,
                       const LatentCodec& codec, const Box* subject,
                       DriftCentering centering = DriftCentering::neutral_gray);

}  // namespace wingen
