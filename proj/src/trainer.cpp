#include "wingen/trainer.hpp"

#include <cmath>
#include <iostream>

#include "json.hpp"
#include "wingen/ops.hpp"
#include "wingen/sampler.hpp"

namespace wingen {

TrainConfig TrainConfig::full_scale() {
    TrainConfig c;
    c.lr_full = 1e-5;
    c.lr_lora = 1e-4;
    c.context_frames = 72;
    c.video_frames = 80;
    return c;
}

void validate(const TrainConfig& c) {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
    };
    prob(c.dropout_text, "dropout_text");
    prob(c.dropout_image, "dropout_image");
    prob(c.dropout_audio, "dropout_audio");
    if (c.context_frames == 0 || c.video_frames == 0) throw ConfigError("context_frames and video_frames must be positive");
    if (!(c.roi.z() > 0)) throw ConfigError("ROI weights must sum to a positive value");
    if (c.roi.full < 0 || c.roi.body < 0 || c.roi.face < 0) throw ConfigError("ROI weights must be non-negative");
    if (!(c.grad_clip > 0)) throw ConfigError("grad_clip must be positive");
    if (c.batch == 0) throw ConfigError("batch must be positive");
    if (!(c.lr_full >= 0 && c.lr_lora >= 0)) throw ConfigError("learning rates must be non-negative");
    if (!(c.shift > 0)) throw ConfigError("shift must be positive");
}

std::optional<TrainingWindow> sample_training_window(std::size_t L, std::size_t tc, std::size_t tv, Rng& rng,
                                                     std::size_t align) {
    if (L < tv) return std::nullopt;
    if (align == 0) align = 1;
    TrainingWindow w;
    std::size_t end;
    if (L >= tc + tv) {
        const std::size_t start = align * rng.below((L - tc - tv) / align + 1);
        w.context_start = start;
        w.video_start = start + tc;
        end = start + tc + tv;
    } else {
        w.zero_context = true;
        w.video_start = align * rng.below((L - tv) / align + 1);
        end = w.video_start + tv;
    }
    if (end < L) {
        w.reference_frame = end + rng.below(L - end);
    } else {
        w.reference_frame = end - 1;
        w.reference_fallback = true;
    }
    return w;
}

namespace {

DenseArray repeat_mask(const DenseArray& m, std::size_t T) {
    DenseArray out({T, m.dim(0), m.dim(1)}, Precision::double_);
    auto d = out.mutable_data();
    for (std::size_t t = 0; t < T; ++t) std::copy(m.data().begin(), m.data().end(), d.begin() + t * m.size());
    return out;
}

}  // namespace

TrainingExample make_example(const FixtureRecord& fx, const TrainingWindow& w, const LatentCodec& codec,
                             const ModelConfig& model, const TrainConfig& train,
                             const std::vector<DenseArray>* audio_layers) {
    const std::size_t tv = train.video_frames, tc = train.context_frames;
    TrainingExample ex;
    ex.z0 = to_model_space(codec.encode(fx.video.slice(w.video_start, w.video_start + tv)), model);
    if (!w.zero_context) ex.context = to_model_space(codec.encode(fx.video.slice(w.context_start, w.context_start + tc)), model);
    const PixelVideo ref = fx.video.slice(w.reference_frame, w.reference_frame + 1);
    ex.reference = to_model_space(codec.encode_image(ref.frames.reshaped({3, ref.height(), ref.width()})), model);
    ex.text = encode_text(fx.prompt, model.text_tokens, model.text_dim);
    std::vector<DenseArray> own;
    if (!audio_layers) {
        own = extract_layers(fx.audio, fx.video.fps);
        audio_layers = &own;
    }
    ex.audio = audio_window(*audio_layers, static_cast<long>(w.video_start), tv, model.audio.history());
    const Triple st = codec.config().stride;
    ex.masks.body = repeat_mask(latent_mask(fx.body, fx.video.height(), fx.video.width(), st), ex.z0.time());
    ex.masks.face = repeat_mask(latent_mask(fx.face, fx.video.height(), fx.video.width(), st), ex.z0.time());
    return ex;
}

std::string DropDecision::describe() const {
    std::string s;
    auto add = [&](bool b, const char* n) {
        if (!b) return;
        if (!s.empty()) s += ",";
        s += n;
    };
    add(text, "text");
    add(image, "image");
    add(audio, "audio");
    return s.empty() ? "none" : s;
}

DropDecision apply_condition_dropout(const DropoutProbs& p, Rng& rng) {
    for (double q : {p.text, p.image, p.audio})
        if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("dropout probability outside [0,1]");
    DropDecision d;
    d.text = rng.bernoulli(p.text);
    d.image = rng.bernoulli(p.image);
    d.audio = rng.bernoulli(p.audio);
    return d;
}

DenseArray roi_token_weights(const ModelConfig& cfg, const RoiMasks& masks, const RoiLossWeights& w, bool* face_fallback) {
    const Shape& ms = masks.body.shape();
    if (ms.size() != 3 || masks.face.shape() != ms)
        throw ShapeError("ROI masks must share a [T,H,W] shape, got " + shape_str(ms) + " and " +
                         shape_str(masks.face.shape()));
    if (!(w.z() > 0)) throw std::invalid_argument("ROI weights must sum to a positive value");
    const std::size_t T = ms[0], H = ms[1], W = ms[2], C = cfg.latent_channels;
    auto expand = [&](const DenseArray& m) {
        DenseArray g({T, C, H, W}, Precision::double_);
        auto d = g.mutable_data();
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t c = 0; c < C; ++c)
                std::copy_n(m.data().begin() + t * H * W, H * W, d.begin() + (t * C + c) * H * W);
        return patchify(g, cfg.patch);
    };
    DenseArray body = expand(masks.body);
    const double n_body = sum_squares(body);
    if (n_body == 0) throw std::invalid_argument("empty body mask");
    DenseArray face = expand(masks.face);
    double n_face = sum_squares(face);
    const bool fallback = n_face == 0;
    if (fallback) {
        std::cerr << "warning: empty face mask, face loss computed over the body mask\n";
        face = body;
        n_face = n_body;
    }
    if (face_fallback) *face_fallback = fallback;
    const double n_full = static_cast<double>(body.size());
    DenseArray out(body.shape(), Precision::double_);
    auto d = out.mutable_data();
    for (std::size_t i = 0; i < out.size(); ++i)
        d[i] = (w.full / n_full + w.body * body[i] / n_body + w.face * face[i] / n_face) / w.z();
    return out;
}

LossResult flow_loss(ParamBinder& bind, const ModelConfig& cfg, const TrainingExample& ex, const RoiLossWeights& w,
                     double t, const DenseArray& eps, const DropDecision& drop) {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("training timestep must lie in (0,1)");
    if (eps.shape() != ex.z0.grid.shape())
        throw ShapeError("noise " + shape_str(eps.shape()) + " does not match latent " + shape_str(ex.z0.grid.shape()));
    const DenseArray& z0 = ex.z0.grid;
    LatentVideo zt{add(scaled(z0, 1.0 - t), scaled(eps, t)), ex.z0.stride};
    const DenseArray target = patchify(sub(eps, z0), cfg.patch);

    DenseArray null_text(ex.text.shape(), Precision::double_);
    LatentVideo null_ref{DenseArray(ex.reference.grid.shape(), Precision::double_), ex.reference.stride};
    DitInput in;
    in.context = ex.context ? &*ex.context : nullptr;
    in.video = &zt;
    in.reference = drop.image ? &null_ref : &ex.reference;
    in.text = drop.text ? &null_text : &ex.text;
    in.audio = &ex.audio;
    in.audio_null = drop.audio;
    in.t = t;
    Var pred = forward(bind, cfg, in);
    Var sq = ops::square(ops::sub(pred, bind.tape().constant(target)));

    LossResult r;
    const DenseArray weights = roi_token_weights(cfg, ex.masks, w, &r.face_fallback);
    r.total = ops::weighted_sum(sq, weights);

    // per-region means, for reporting
    RoiLossWeights only_full{1, 0, 0}, only_body{0, 1, 0}, only_face{0, 0, 1};
    const DenseArray& s = sq.value();
    auto dot = [&](const DenseArray& wt) {
        double acc = 0;
        for (std::size_t i = 0; i < s.size(); ++i) acc += s[i] * wt[i];
        return acc;
    };
    r.full = dot(roi_token_weights(cfg, ex.masks, only_full));
    r.body = dot(roi_token_weights(cfg, ex.masks, only_body));
    r.face = dot(roi_token_weights(cfg, ex.masks, only_face));
    return r;
}

std::string StepMetrics::to_json() const {
    nlohmann::json j{{"step", step},           {"loss", loss},           {"loss_full", loss_full},
                     {"loss_body", loss_body}, {"loss_face", loss_face}, {"grad_norm", grad_norm},
                     {"dropped_modalities", dropped}};
    if (aborted) {
        j["aborted"] = true;
        j["diagnostic"] = diagnostic;
    }
    return j.dump();
}

Trainer::Trainer(ModelConfig model, TrainConfig train, ModelParams params, LoraAdapter adapter)
    : model_(std::move(model)), train_(std::move(train)), params_(std::move(params)), adapter_(std::move(adapter)) {
    validate(model_);
    validate(train_);
}

double Trainer::lr_for(const std::string& name) const {
    return name.rfind("lora.", 0) == 0 ? train_.lr_lora : train_.lr_full;
}

std::vector<std::string> Trainer::trainable_names() const {
    Tape tape(Precision::double_, false);
    ParamBinder bind(tape, params_, &adapter_, GradScope::routed);
    std::vector<std::string> out;
    for (const auto& [name, shape] : bind.trainable_shapes()) out.push_back(name);
    return out;
}

namespace {

DenseArray& locate(const std::string& name, ModelParams& params, LoraAdapter& adapter) {
    if (name.rfind("lora.", 0) == 0) {
        const std::string rest = name.substr(5);
        const std::string target = rest.substr(0, rest.size() - 2);
        LoraPair& p = adapter.mutable_pair(target);
        return rest.back() == 'a' ? p.a : p.b;
    }
    return params.mutable_get(name);
}

}  // namespace

double clip_gradients(ParamMap& grads, double max_norm) {
    double sq = 0;
    for (const auto& [name, g] : grads) sq += sum_squares(g);
    const double norm = std::sqrt(sq);
    if (norm > max_norm)
        for (auto& [name, g] : grads) g = scaled(g, max_norm / norm);
    return norm;
}

void Trainer::apply_gradients(const ParamMap& raw, double* grad_norm) {
    ParamMap grads = raw;
    const double norm = clip_gradients(grads, train_.grad_clip);
    if (grad_norm) *grad_norm = norm;
    ++adam_t_;
    const double b1 = train_.beta1, b2 = train_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
    for (const auto& [name, g] : grads) {
        DenseArray& theta = locate(name, params_, adapter_);
        if (theta.shape() != g.shape()) throw ShapeError("gradient for " + name + " has the wrong shape");
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.empty()) {
            m.assign(g.size(), 0.0);
            v.assign(g.size(), 0.0);
        }
        const double lr = lr_for(name);
        auto d = theta.mutable_data();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double gi = g[i];
            m[i] = b1 * m[i] + (1 - b1) * gi;
            v[i] = b2 * v[i] + (1 - b2) * gi * gi;
            const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + train_.adam_eps);
            d[i] -= lr * (update + train_.weight_decay * d[i]);
        }
        theta.normalize();
    }
}

StepMetrics Trainer::step(const std::vector<TrainingExample>& batch) {
    if (batch.empty()) throw std::invalid_argument("empty training batch");
    StepMetrics out;
    out.step = step_;
    Rng rng = Rng(train_.seed).fork(0x7EA1 + step_);
    const DropoutProbs probs{train_.dropout_text, train_.dropout_image, train_.dropout_audio};
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    ParamMap total;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const TrainingExample& ex = batch[i];
        const double t = shift_timestep(rng.uniform_open(), train_.shift);
        const DenseArray eps = rng.normal_array(ex.z0.grid.shape(), Precision::double_);
        const DropDecision drop = apply_condition_dropout(probs, rng);
        out.dropped.push_back(drop.describe());
        Tape tape(Precision::double_);
        ParamBinder bind(tape, params_, &adapter_, GradScope::routed);
        LossResult r = flow_loss(bind, model_, ex, train_.roi, t, eps, drop);
        out.loss += r.total.value()[0] * inv_b;
        out.loss_full += r.full * inv_b;
        out.loss_body += r.body * inv_b;
        out.loss_face += r.face * inv_b;
        NamedGradients g = grad(tape, ops::scale(r.total, inv_b), bind.trainable_shapes());
        for (auto& [name, arr] : g.grads) {
            auto it = total.find(name);
            if (it == total.end())
                total.emplace(name, std::move(arr));
            else
                it->second = add(it->second, arr);
        }
    }
    bool finite = std::isfinite(out.loss);
    for (const auto& [name, g] : total) finite = finite && all_finite(g);
    ++step_;
    if (!finite) {
        out.aborted = true;
        out.diagnostic = "non-finite loss or gradient; step skipped, parameters unchanged";
        std::cerr << "warning: step " << out.step << ": " << out.diagnostic << "\n";
        return out;
    }
    apply_gradients(total, &out.grad_norm);
    return out;
}

double evaluate_loss(const ModelParams& params, const LoraAdapter* adapter, const ModelConfig& cfg,
                     const std::vector<TrainingExample>& examples, const RoiLossWeights& w, std::uint64_t seed) {
    double acc = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        Rng rng = Rng(seed).fork(i);
        const double t = shift_timestep(rng.uniform_open(), 5.0);
        const DenseArray eps = rng.normal_array(examples[i].z0.grid.shape(), Precision::double_);
        Tape tape(Precision::double_, false);
        ParamBinder bind(tape, params, adapter, GradScope::none);
        acc += flow_loss(bind, cfg, examples[i], w, t, eps).total.value()[0];
    }
    return acc / static_cast<double>(examples.size());
}

std::vector<TrainingExample> sample_batch(const std::vector<FixtureRecord>& pool,
                                          const std::vector<std::vector<DenseArray>>& pool_layers,
                                          const LatentCodec& codec, const ModelConfig& model, const TrainConfig& train,
                                          std::size_t count, Rng& rng) {
    if (pool.empty()) throw std::invalid_argument("empty fixture pool");
    std::vector<TrainingExample> out;
    std::size_t attempts = 0;
    while (out.size() < count) {
        if (++attempts > 100 * count) throw std::runtime_error("no fixture is long enough for a training window");
        const std::size_t k = rng.below(pool.size());
        auto w = sample_training_window(pool[k].video.time(), train.context_frames, train.video_frames, rng,
                                        codec.config().stride.t);
        if (!w) continue;
        out.push_back(make_example(pool[k], *w, codec, model, train, pool_layers.empty() ? nullptr : &pool_layers[k]));
    }
    return out;
}

}  // namespace wingen
