#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wingen/dense_array.hpp"
#include "wingen/params.hpp"

namespace wingen {

/// Mono audio.
struct AudioTrack {
    std::vector<double> samples;
    std::uint32_t sample_rate = 16000;

    /// Whole video frames covered at `frame_rate`.
    std::size_t frame_count(double frame_rate) const;
    AudioTrack slice_frames(std::size_t f0, std::size_t f1, double frame_rate) const;
};

/// "WGA1" file: magic, u32 sample_rate, u32 sample count, f32 samples (little-endian).
void write_audio(const std::string& path, const AudioTrack& track);
AudioTrack read_audio(const std::string& path);

std::size_t samples_per_frame(std::uint32_t sample_rate, double frame_rate);

/// Per-frame RMS of the samples in each video frame.
std::vector<double> energy_envelope(const AudioTrack& track, double frame_rate);

struct AudioFeatureConfig {
    std::size_t bands = 8;
    double band_width_hz = 500.0;
    // causal averaging windows, in frames, one per feature layer
    std::vector<std::size_t> layer_windows{1, 2, 4};
    double log_gain = 10.0;
};

/// Multi-scale band-energy features, one [frames x bands] array per layer.
/// Layer l at frame f is log1p(gain * mean band power over frames (f - w_l, f]).
std::vector<DenseArray> extract_layers(const AudioTrack& track, double frame_rate,
                                       const AudioFeatureConfig& config = {});

/// Frames [start, start + frames) of every layer, preceded by `history` frames of causal
/// context (zero rows before the start of the track).
struct AudioWindow {
    std::vector<DenseArray> layers;
    std::size_t history = 0;
    std::size_t frames() const { return layers.empty() ? 0 : layers.front().dim(0) - history; }
};

AudioWindow audio_window(const std::vector<DenseArray>& layers, long start, std::size_t frames,
                         std::size_t history);

struct AudioCompressConfig {
    std::size_t audio_dim = 16;
    std::size_t tokens_per_latent = 4;
    std::size_t stride_t = 4;
    std::size_t kernel = 8;
    std::size_t history() const { return kernel > stride_t ? kernel - stride_t : 0; }
};

/// Adds the aggregation/compression weights (audio.*) to `params` with role `full`.
void init_audio_params(ModelParams& params, std::size_t layers, std::size_t bands,
                       const AudioCompressConfig& config, std::uint64_t seed);

/// Softmax-weighted layer sum -> projection -> causal strided 1-D convolution.
/// Returns [latent_frames * tokens_per_latent, audio_dim]; token block t only sees frames
/// up to (t + 1) * stride_t - 1 of the window.
Var aggregate_and_compress(ParamBinder& bind, const AudioWindow& window, const AudioCompressConfig& config);

struct AudioTrackFeatures {
    DenseArray per_latent_tokens;  // [latent_time, tokens_per_latent, audio_dim]
    DenseArray layer_weights;      // [layers]
};

/// Inference-only evaluation of aggregate_and_compress.
AudioTrackFeatures compute_audio_features(const ModelParams& params, const AudioWindow& window,
                                          const AudioCompressConfig& config);

}  // namespace wingen
