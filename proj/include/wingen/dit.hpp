#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wingen/audio.hpp"
#include "wingen/codec.hpp"
#include "wingen/framepack.hpp"
#include "wingen/params.hpp"
#include "wingen/tokens.hpp"

namespace wingen {

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class GateMode { scalar, matrix };

struct ModelConfig {
    std::size_t latent_channels = 16;
    Triple patch{1, 2, 2};
    std::size_t model_dim = 64;
    std::size_t blocks = 6;
    std::size_t heads = 4;
    std::size_t mlp_dim = 256;
    std::size_t freq_dim = 32;
    std::size_t text_dim = 16;
    std::size_t text_tokens = 8;
    std::size_t audio_bands = 8;
    std::size_t audio_layers = 3;
    AudioCompressConfig audio{};
    std::vector<std::size_t> audio_blocks{0, 3, 5};
    GateMode gate_mode = GateMode::matrix;
    int ref_offset = 10;
    std::size_t lora_rank = 4;
    double lora_alpha = 4.0;
    PackPlan pack_plan{};
    // diffusion runs on (latent - dc_mean on the colour-mean channels) / latent_std
    double latent_dc_mean = 16.0;
    double latent_std = 8.0;

    std::size_t patch_dim() const { return latent_channels * patch.volume(); }
    std::size_t head_dim() const { return model_dim / heads; }

    static ModelConfig desk();
    static ModelConfig full_scale();
};

/// Throws ConfigError on inconsistent settings (unknown injection block, heads not
/// dividing model_dim, final block not injected, ...).
void validate(const ModelConfig& cfg);

/// Deterministic bag-of-words text embedding, [text_tokens x text_dim]; zeros are the
/// null (dropped) text.
DenseArray encode_text(const std::string& prompt, std::size_t tokens, std::size_t dim);

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);
/// Adapter over every lora_target weight; A seeded Gaussian, B zero.
LoraAdapter init_lora(const ModelConfig& cfg, const ModelParams& params, std::uint64_t seed);
/// Copies text cross-attention weights into the audio cross-attention of every injected
/// block where shapes agree (others re-drawn from `seed`) and zeroes the gates.
void init_audio_from_text(ModelParams& params, const ModelConfig& cfg, std::uint64_t seed);

struct TokenSequence {
    Var tokens;  // [N x model_dim]
    PositionGrid positions;
    std::size_t n_context = 0, n_video = 0, n_reference = 0;
};

/// [packed context | video | reference] embedded tokens with their positions.
TokenSequence assemble_tokens(ParamBinder& bind, const ModelConfig& cfg, const LatentVideo* context,
                              const LatentVideo& video, const LatentVideo& reference);

/// Latent conditions for one forward pass. Latents are in diffusion space.
struct DitInput {
    const LatentVideo* context = nullptr;  // null or zero frames: no context tokens
    const LatentVideo* video = nullptr;    // noisy latent z_t
    const LatentVideo* reference = nullptr;
    const DenseArray* text = nullptr;     // [text_tokens x text_dim]
    const AudioWindow* audio = nullptr;   // null: audio absent
    bool audio_null = false;              // zero audio tokens (dropped condition)
    double t = 1.0;
};

/// Transformer body on an assembled sequence; returns the hidden state of every token.
/// `audio_tokens` [video_latents * M x audio_dim] or absent.
Var forward_hidden(ParamBinder& bind, const ModelConfig& cfg, const TokenSequence& seq, double t, Var text,
                   std::optional<Var> audio_tokens);

/// Velocity prediction for the video tokens, [video tokens x patch_dim].
Var forward(ParamBinder& bind, const ModelConfig& cfg, const DitInput& in);

/// Inference helper: velocity as a latent grid shaped like in.video.
LatentVideo predict_velocity(const ModelParams& params, const LoraAdapter* adapter, const ModelConfig& cfg,
                             const DitInput& in);

/// Codec latents <-> diffusion space.
LatentVideo to_model_space(const LatentVideo& z, const ModelConfig& cfg);
LatentVideo from_model_space(const LatentVideo& z, const ModelConfig& cfg);

}  // namespace wingen
