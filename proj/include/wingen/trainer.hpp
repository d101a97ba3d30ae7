#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wingen/dit.hpp"
#include "wingen/rng.hpp"
#include "wingen/synth.hpp"

namespace wingen {

struct RoiLossWeights {
    double full = 1.0, body = 1.0, face = 1.0;
    double z() const { return full + body + face; }
};

struct TrainConfig {
    double lr_full = 4e-3;
    double lr_lora = 4e-2;
    double weight_decay = 0.0;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double dropout_text = 0.1, dropout_image = 0.1, dropout_audio = 0.1;
    std::size_t context_frames = 12;
    std::size_t video_frames = 16;
    double grad_clip = 1.0;
    std::size_t batch = 32;
    std::size_t steps = 200;
    double shift = 5.0;
    RoiLossWeights roi{};
    std::uint64_t seed = 2024;

    static TrainConfig desk() { return TrainConfig{}; }
    static TrainConfig full_scale();
};

void validate(const TrainConfig& cfg);

/// Where one training sample sits inside a clip (frame indices).
struct TrainingWindow {
    bool zero_context = false;
    std::size_t context_start = 0;  // unused when zero_context
    std::size_t video_start = 0;
    std::size_t reference_frame = 0;
    bool reference_fallback = false;  // no frame after the window; last video frame used
};

/// nullopt when the clip is shorter than Tv (skip the record). Window starts are
/// multiples of `align`.
std::optional<TrainingWindow> sample_training_window(std::size_t clip_frames, std::size_t tc, std::size_t tv, Rng& rng,
                                                     std::size_t align = 1);

/// Latent-resolution region weights, [latent_time, latent_h, latent_w] in {0, 1}.
struct RoiMasks {
    DenseArray body;
    DenseArray face;
};

/// One conditioned clip window, latents already in diffusion space.
struct TrainingExample {
    LatentVideo z0;
    std::optional<LatentVideo> context;
    LatentVideo reference;
    DenseArray text;
    AudioWindow audio;
    RoiMasks masks;
};

TrainingExample make_example(const FixtureRecord& fx, const TrainingWindow& w, const LatentCodec& codec,
                             const ModelConfig& model, const TrainConfig& train,
                             const std::vector<DenseArray>* audio_layers = nullptr);

struct DropDecision {
    bool text = false, image = false, audio = false;
    /// Comma-joined dropped modalities, or "none".
    std::string describe() const;
};

struct DropoutProbs {
    double text = 0.1, image = 0.1, audio = 0.1;
};

DropDecision apply_condition_dropout(const DropoutProbs& probs, Rng& rng);

struct LossResult {
    Var total;
    double full = 0, body = 0, face = 0;
    bool face_fallback = false;
};

/// z_t = (1 - t) z0 + t eps, target eps - z0, ROI-weighted squared error over video tokens.
LossResult flow_loss(ParamBinder& bind, const ModelConfig& cfg, const TrainingExample& ex, const RoiLossWeights& w,
                     double t, const DenseArray& eps, const DropDecision& drop = {});

/// Combined ROI weights [video tokens x patch_dim] whose weighted sum of squared errors is
/// the total loss; also reports whether the face mask fell back to the body mask.
DenseArray roi_token_weights(const ModelConfig& cfg, const RoiMasks& masks, const RoiLossWeights& w,
                             bool* face_fallback = nullptr);

/// Scales every gradient by max_norm / global_norm when the norm exceeds max_norm.
/// Returns the norm before clipping.
double clip_gradients(ParamMap& grads, double max_norm);

struct StepMetrics {
    std::size_t step = 0;
    double loss = 0, loss_full = 0, loss_body = 0, loss_face = 0;
    double grad_norm = 0;
    std::vector<std::string> dropped;
    bool aborted = false;
    std::string diagnostic;
    std::string to_json() const;
};

/// AdamW with two learning-rate groups (`full` weights and adapter factors), global
/// gradient clipping, and NaN-abort.
class Trainer {
public:
    Trainer(ModelConfig model, TrainConfig train, ModelParams params, LoraAdapter adapter);

    StepMetrics step(const std::vector<TrainingExample>& batch);
    /// Applies a precomputed gradient (named like the trainable set); used by step().
    void apply_gradients(const ParamMap& grads, double* grad_norm = nullptr);

    const ModelParams& params() const { return params_; }
    const LoraAdapter& adapter() const { return adapter_; }
    ModelParams& mutable_params() { return params_; }
    LoraAdapter& mutable_adapter() { return adapter_; }
    std::size_t steps_done() const { return step_; }
    double lr_for(const std::string& name) const;
    std::vector<std::string> trainable_names() const;

private:
    ModelConfig model_;
    TrainConfig train_;
    ModelParams params_;
    LoraAdapter adapter_;
    std::map<std::string, std::vector<double>> m_, v_;
    std::size_t step_ = 0;
    std::size_t adam_t_ = 0;
};

/// Loss on fixed (t, eps) per example with no dropout, for progress measurement.
double evaluate_loss(const ModelParams& params, const LoraAdapter* adapter, const ModelConfig& cfg,
                     const std::vector<TrainingExample>& examples, const RoiLossWeights& w, std::uint64_t seed);

/// Samples a batch of windows from the fixture pool.
std::vector<TrainingExample> sample_batch(const std::vector<FixtureRecord>& pool,
                                          const std::vector<std::vector<DenseArray>>& pool_layers,
                                          const LatentCodec& codec, const ModelConfig& model, const TrainConfig& train,
                                          std::size_t count, Rng& rng);

}  // namespace wingen
