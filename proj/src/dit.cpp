#include "wingen/dit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wingen/checkpoint.hpp"
#include "wingen/ops.hpp"
#include "wingen/rng.hpp"

namespace wingen {

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full_scale() {
    ModelConfig c;
    c.latent_channels = 48;
    c.model_dim = 3072;
    c.blocks = 30;
    c.heads = 24;
    c.mlp_dim = 14336;
    c.freq_dim = 256;
    c.text_dim = 4096;
    c.text_tokens = 512;
    c.audio.audio_dim = 1024;
    c.audio_blocks = {0, 3, 6, 9, 12, 15, 18, 21, 24, 27, 29};
    c.lora_rank = 128;
    c.lora_alpha = 128;
    return c;
}

void validate(const ModelConfig& c) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (c.model_dim == 0 || c.heads == 0 || c.model_dim % c.heads)
        fail("model_dim " + std::to_string(c.model_dim) + " not divisible by heads " + std::to_string(c.heads));
    if (c.head_dim() % 2) fail("head_dim must be even for rotary encoding");
    if (c.patch.t != 1) fail("patch.t must be 1 (reference image is a single latent frame)");
    if (c.blocks == 0) fail("blocks must be positive");
    if (c.ref_offset < 1) fail("ref_offset must be >= 1");
    if (c.lora_rank == 0) fail("lora_rank must be positive");
    if (c.latent_std <= 0) fail("latent_std must be positive");
    if (c.freq_dim % 2) fail("freq_dim must be even");
    if (c.audio.stride_t == 0 || c.audio.kernel < c.audio.stride_t) fail("audio kernel must be >= stride_t");
    std::set<std::size_t> seen;
    for (std::size_t b : c.audio_blocks) {
        if (b >= c.blocks) fail("audio injection block " + std::to_string(b) + " outside 0.." + std::to_string(c.blocks - 1));
        if (!seen.insert(b).second) fail("audio injection block " + std::to_string(b) + " listed twice");
    }
    if (!seen.count(c.blocks - 1)) fail("audio injection plan must include the final block");
    if (c.pack_plan.buckets.empty()) fail("pack plan has no buckets");
    for (std::size_t i = 0; i < c.pack_plan.buckets.size(); ++i) {
        const auto& b = c.pack_plan.buckets[i];
        if (b.patch.volume() == 0) fail("pack bucket " + std::to_string(i) + " has a zero patch size");
        if (b.patch.h % c.patch.h || b.patch.w % c.patch.w)
            fail("pack bucket " + std::to_string(i) + " spatial patch must be a multiple of the video patch");
        if (b.frames == 0 && i + 1 != c.pack_plan.buckets.size()) fail("only the last pack bucket may take the rest");
    }
}

DenseArray encode_text(const std::string& prompt, std::size_t tokens, std::size_t dim) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : prompt) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    DenseArray out({tokens, dim}, Precision::double_);
    auto d = out.mutable_data();
    for (std::size_t i = 0; i < std::min(tokens, words.size()); ++i) {
        Rng rng(fnv1a64(words[i]));
        for (std::size_t j = 0; j < dim; ++j) d[i * dim + j] = rng.normal() / std::sqrt(double(dim));
    }
    return out;
}

namespace {

std::string blk(std::size_t i) { return "blocks." + std::to_string(i) + "."; }

void add_linear(ModelParams& p, Rng& rng, const std::string& name, std::size_t in, std::size_t out, ParamRole wrole,
                ParamRole brole, double gain = 1.0, bool bias = true) {
    p.add(name + ".w", rng.normal_array({in, out}, Precision::double_, gain / std::sqrt(double(in))), wrole);
    if (bias) p.add(name + ".b", DenseArray({1, out}, Precision::double_), brole);
}

bool injected(const ModelConfig& c, std::size_t i) {
    return std::find(c.audio_blocks.begin(), c.audio_blocks.end(), i) != c.audio_blocks.end();
}

const char* kAttnParts[] = {"q", "k", "v", "o"};

}  // namespace

ModelParams init_model(const ModelConfig& c, std::uint64_t seed) {
    validate(c);
    const std::size_t D = c.model_dim, P = c.patch_dim();
    const auto F = ParamRole::full, Z = ParamRole::frozen, L = ParamRole::lora_target;
    Rng root(seed);
    Rng rng = root.fork(1);
    ModelParams p;
    add_linear(p, rng, "patch_embed", P, D, F, F);
    add_linear(p, rng, "time.fc1", c.freq_dim, D, F, F);
    add_linear(p, rng, "time.fc2", D, D, F, F);
    add_linear(p, rng, "time.proj", D, 6 * D, F, F, 0.1);
    add_linear(p, rng, "time.head", D, 2 * D, F, F, 0.1);
    p.add("head.mod", DenseArray({1, 2 * D}, Precision::double_), F);
    add_linear(p, rng, "head.out", D, P, F, F, 0.1);
    for (std::size_t i = 0; i < c.blocks; ++i) {
        DenseArray mod({1, 6 * D}, Precision::double_);
        // residual gates start open
        for (std::size_t j = 0; j < D; ++j) mod.mutable_data()[2 * D + j] = mod.mutable_data()[5 * D + j] = 1.0;
        p.add(blk(i) + "mod", std::move(mod), F);
        for (const char* part : kAttnParts) add_linear(p, rng, blk(i) + "self_attn." + part, D, D, L, Z);
        add_linear(p, rng, blk(i) + "text_attn.q", D, D, L, Z);
        add_linear(p, rng, blk(i) + "text_attn.k", c.text_dim, D, L, Z);
        add_linear(p, rng, blk(i) + "text_attn.v", c.text_dim, D, L, Z);
        add_linear(p, rng, blk(i) + "text_attn.o", D, D, L, Z);
        add_linear(p, rng, blk(i) + "mlp.fc1", D, c.mlp_dim, L, Z);
        add_linear(p, rng, blk(i) + "mlp.fc2", c.mlp_dim, D, L, Z);
        if (injected(c, i)) {
            add_linear(p, rng, blk(i) + "audio_attn.q", D, D, F, F, 1.0, false);
            add_linear(p, rng, blk(i) + "audio_attn.k", c.audio.audio_dim, D, F, F, 1.0, false);
            add_linear(p, rng, blk(i) + "audio_attn.v", c.audio.audio_dim, D, F, F, 1.0, false);
            add_linear(p, rng, blk(i) + "audio_attn.o", D, D, F, F, 1.0, false);
            p.add(blk(i) + "audio_gate",
                  c.gate_mode == GateMode::scalar ? DenseArray({1, 1}, Precision::double_)
                                                  : DenseArray({D, D}, Precision::double_),
                  F);
        }
    }
    init_audio_params(p, c.audio_layers, c.audio_bands, c.audio, root.fork(2).next_u64());
    init_pack_params(p, c.pack_plan, c.latent_channels, D, root.fork(3).next_u64());
    init_audio_from_text(p, c, root.fork(4).next_u64());
    return p;
}

LoraAdapter init_lora(const ModelConfig& c, const ModelParams& params, std::uint64_t seed) {
    LoraAdapter ad(c.lora_rank, c.lora_alpha);
    Rng rng(seed);
    for (const auto& name : params.names_with_role(ParamRole::lora_target)) {
        const DenseArray& w = params.get(name);
        const std::size_t n = w.dim(0), m = w.dim(1);
        ad.add(name, LoraPair{rng.normal_array({n, c.lora_rank}, Precision::double_, 1.0 / std::sqrt(double(n))),
                              DenseArray({m, c.lora_rank}, Precision::double_)});
    }
    return ad;
}

void init_audio_from_text(ModelParams& p, const ModelConfig& c, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i : c.audio_blocks) {
        for (const char* part : kAttnParts) {
            const std::string src = blk(i) + "text_attn." + part + ".w";
            const std::string dst = blk(i) + "audio_attn." + part + ".w";
            if (!p.contains(src)) throw ConfigError("missing text cross-attention weight " + src);
            if (!p.contains(dst)) throw ConfigError("missing audio cross-attention weight " + dst);
            const Shape shape = p.get(dst).shape();
            if (p.get(src).shape() == shape)
                p.set(dst, p.get(src).cast(p.get(dst).precision()));
            else
                p.set(dst, rng.normal_array(shape, p.get(dst).precision(), 1.0 / std::sqrt(double(shape[0]))));
        }
        const std::string gate = blk(i) + "audio_gate";
        p.set(gate, DenseArray(p.get(gate).shape(), p.get(gate).precision()));
    }
}

TokenSequence assemble_tokens(ParamBinder& bind, const ModelConfig& c, const LatentVideo* context,
                              const LatentVideo& video, const LatentVideo& reference) {
    check_patch_divisible(video.grid.shape(), c.patch, "video");
    check_patch_divisible(reference.grid.shape(), c.patch, "reference");
    if (reference.time() != 1) throw ShapeError("reference must be one latent frame, got " + std::to_string(reference.time()));
    if (reference.height() != video.height() || reference.width() != video.width())
        throw ShapeError("reference grid " + shape_str(reference.grid.shape()) + " does not match video " +
                         shape_str(video.grid.shape()));
    TokenSequence seq;
    std::vector<Var> parts;
    if (context && context->grid.rank() == 4 && context->time() > 0) {
        if (context->height() != video.height() || context->width() != video.width())
            throw ShapeError("context grid " + shape_str(context->grid.shape()) + " does not match video " +
                             shape_str(video.grid.shape()));
        PackedContext packed = pack(bind, *context, c.pack_plan, c.patch);
        if (packed.tokens) {
            parts.push_back(*packed.tokens);
            seq.positions.append(packed.positions);
            seq.n_context = packed.positions.size();
        }
    }
    Tape& tape = bind.tape();
    parts.push_back(bind.linear(tape.constant(patchify(video.grid, c.patch)), "patch_embed"));
    seq.positions.append(video_positions(video.time(), video.height(), video.width(), c.patch));
    seq.n_video = seq.positions.size() - seq.n_context;
    parts.push_back(bind.linear(tape.constant(patchify(reference.grid, c.patch)), "patch_embed"));
    seq.positions.append(reference_positions(video.time(), video.height(), video.width(), c.patch, c.ref_offset));
    seq.n_reference = seq.positions.size() - seq.n_context - seq.n_video;
    seq.tokens = ops::concat_rows(parts);
    return seq;
}

namespace {

// rotary angles [N x head_dim/2]: leading pairs encode t, then h, then w
DenseArray rope_angles(const PositionGrid& g, std::size_t head_dim) {
    const std::size_t pairs = head_dim / 2, hw = head_dim / 6, tp = pairs - 2 * hw;
    DenseArray out({g.size(), pairs}, Precision::double_);
    auto d = out.mutable_data();
    auto fill = [&](std::size_t row, std::size_t offset, std::size_t n, int pos) {
        for (std::size_t j = 0; j < n; ++j)
            d[row * pairs + offset + j] = pos * std::pow(10000.0, -static_cast<double>(j) / static_cast<double>(n));
    };
    for (std::size_t i = 0; i < g.size(); ++i) {
        fill(i, 0, tp, g.pos[i].t);
        fill(i, tp, hw, g.pos[i].h);
        fill(i, tp + hw, hw, g.pos[i].w);
    }
    return out;
}

DenseArray time_features(double t, std::size_t dim) {
    const std::size_t half = dim / 2;
    DenseArray out({1, dim}, Precision::double_);
    auto d = out.mutable_data();
    for (std::size_t i = 0; i < half; ++i) {
        const double f = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
        d[i] = std::cos(1000.0 * t * f);
        d[half + i] = std::sin(1000.0 * t * f);
    }
    return out;
}

Var attention(Var q, Var k, Var v, std::size_t heads, const DenseArray* q_angles, const DenseArray* k_angles,
              const std::vector<std::uint8_t>* allow) {
    const std::size_t D = q.shape()[1], dh = D / heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = ops::slice_cols(q, h * dh, (h + 1) * dh);
        Var kh = ops::slice_cols(k, h * dh, (h + 1) * dh);
        Var vh = ops::slice_cols(v, h * dh, (h + 1) * dh);
        if (q_angles) qh = ops::rotary(qh, *q_angles);
        if (k_angles) kh = ops::rotary(kh, *k_angles);
        Var s = ops::scale(ops::matmul_nt(qh, kh), inv);
        Var p = allow ? ops::masked_softmax_rows(s, *allow) : ops::softmax_rows(s);
        outs.push_back(ops::matmul(p, vh));
    }
    return heads == 1 ? outs.front() : ops::concat_cols(outs);
}

Var modulate(Var x, Var shift, Var scale) {
    return ops::add_row(ops::mul_row(ops::layer_norm_rows(x), ops::add_const(scale, 1.0)), shift);
}

}  // namespace

Var forward_hidden(ParamBinder& bind, const ModelConfig& c, const TokenSequence& seq, double t, Var text,
                   std::optional<Var> audio_tokens) {
    const std::size_t D = c.model_dim, N = seq.positions.size();
    if (seq.tokens.shape() != Shape{N, D})
        throw ShapeError("token array " + shape_str(seq.tokens.shape()) + " does not match " + std::to_string(N) +
                         " positions");
    if (text.shape().size() != 2 || text.shape()[1] != c.text_dim)
        throw ShapeError("text tokens " + shape_str(text.shape()) + " do not have width " + std::to_string(c.text_dim));
    Tape& tape = bind.tape();

    // audio mask: a video token covering latent frames [t, t + pt) sees audio blocks t..t+pt-1
    std::vector<std::uint8_t> allow;
    if (audio_tokens) {
        const std::size_t M = c.audio.tokens_per_latent;
        int max_t = -1;
        for (std::size_t i = 0; i < N; ++i)
            if (seq.positions.role[i] == TokenRole::video) max_t = std::max(max_t, seq.positions.pos[i].t);
        const std::size_t video_latents = static_cast<std::size_t>(max_t + 1) + c.patch.t - 1;
        const Shape& as = audio_tokens->shape();
        if (as.size() != 2 || as[1] != c.audio.audio_dim || as[0] != video_latents * M)
            throw ShapeError("audio tokens " + shape_str(as) + " do not cover " + std::to_string(video_latents) +
                             " video latents x " + std::to_string(M) + " tokens");
        const std::size_t Na = as[0];
        allow.assign(N * Na, 0);
        for (std::size_t i = 0; i < N; ++i) {
            if (seq.positions.role[i] != TokenRole::video) continue;
            const std::size_t t0 = static_cast<std::size_t>(seq.positions.pos[i].t);
            for (std::size_t j = t0 * M; j < (t0 + c.patch.t) * M; ++j) allow[i * Na + j] = 1;
        }
    }

    const DenseArray angles = rope_angles(seq.positions, c.head_dim());
    Var temb = bind.linear(ops::silu(bind.linear(tape.constant(time_features(t, c.freq_dim)), "time.fc1")), "time.fc2");
    Var e = bind.linear(ops::silu(temb), "time.proj");

    Var x = seq.tokens;
    for (std::size_t i = 0; i < c.blocks; ++i) {
        const std::string b = blk(i);
        Var mod = ops::add(e, bind.get(b + "mod"));
        auto chunk = [&](std::size_t k) { return ops::slice_cols(mod, k * D, (k + 1) * D); };

        Var h = modulate(x, chunk(0), chunk(1));
        Var sa = attention(bind.linear(h, b + "self_attn.q"), bind.linear(h, b + "self_attn.k"),
                           bind.linear(h, b + "self_attn.v"), c.heads, &angles, &angles, nullptr);
        x = ops::add(x, ops::mul_row(bind.linear(sa, b + "self_attn.o"), chunk(2)));

        Var hn = ops::layer_norm_rows(x);
        Var ta = attention(bind.linear(hn, b + "text_attn.q"), bind.linear(text, b + "text_attn.k"),
                           bind.linear(text, b + "text_attn.v"), c.heads, nullptr, nullptr, nullptr);
        x = ops::add(x, bind.linear(ta, b + "text_attn.o"));

        if (audio_tokens && injected(c, i)) {
            Var an = ops::layer_norm_rows(x);
            Var aa = attention(bind.linear(an, b + "audio_attn.q"), bind.linear(*audio_tokens, b + "audio_attn.k"),
                               bind.linear(*audio_tokens, b + "audio_attn.v"), c.heads, nullptr, nullptr, &allow);
            Var y = bind.linear(aa, b + "audio_attn.o");
            Var gate = bind.get(b + "audio_gate");
            x = ops::add(x, gate.shape() == Shape{1, 1} ? ops::scale_by(y, gate) : ops::matmul(y, gate));
        }

        Var hm = modulate(x, chunk(3), chunk(4));
        Var m = bind.linear(ops::gelu(bind.linear(hm, b + "mlp.fc1")), b + "mlp.fc2");
        x = ops::add(x, ops::mul_row(m, chunk(5)));
    }
    return x;
}

namespace {

Var head(ParamBinder& bind, const ModelConfig& c, const TokenSequence& seq, Var hidden, double t) {
    const std::size_t D = c.model_dim;
    std::vector<long> rows;
    for (std::size_t i = 0; i < seq.positions.size(); ++i)
        if (seq.positions.role[i] == TokenRole::video) rows.push_back(static_cast<long>(i));
    Var hv = ops::gather_rows(hidden, rows);
    Tape& tape = bind.tape();
    Var temb = bind.linear(ops::silu(bind.linear(tape.constant(time_features(t, c.freq_dim)), "time.fc1")), "time.fc2");
    Var mod = ops::add(bind.linear(ops::silu(temb), "time.head"), bind.get("head.mod"));
    return bind.linear(modulate(hv, ops::slice_cols(mod, 0, D), ops::slice_cols(mod, D, 2 * D)), "head.out");
}

}  // namespace

Var forward(ParamBinder& bind, const ModelConfig& c, const DitInput& in) {
    if (!in.video || !in.reference || !in.text) throw std::invalid_argument("forward needs video, reference and text");
    if (!(in.t >= 0.0 && in.t <= 1.0)) throw std::invalid_argument("timestep outside [0,1]: " + std::to_string(in.t));
    TokenSequence seq = assemble_tokens(bind, c, in.context, *in.video, *in.reference);
    Tape& tape = bind.tape();
    std::optional<Var> audio;
    if (in.audio) {
        const std::size_t lat = in.audio->frames() / c.audio.stride_t;
        if (in.audio->frames() % c.audio.stride_t || lat != in.video->time())
            throw ShapeError("audio covers " + std::to_string(in.audio->frames()) + " frames but video has " +
                             std::to_string(in.video->time()) + " latents");
        audio = in.audio_null ? tape.constant(DenseArray({lat * c.audio.tokens_per_latent, c.audio.audio_dim}, tape.precision()))
                              : aggregate_and_compress(bind, *in.audio, c.audio);
    }
    Var hidden = forward_hidden(bind, c, seq, in.t, tape.constant(*in.text), audio);
    return head(bind, c, seq, hidden, in.t);
}

LatentVideo predict_velocity(const ModelParams& params, const LoraAdapter* adapter, const ModelConfig& c,
                             const DitInput& in) {
    Tape tape(params.get("patch_embed.w").precision(), false);
    ParamBinder bind(tape, params, adapter, GradScope::none);
    Var v = forward(bind, c, in);
    return LatentVideo{unpatchify(v.value(), c.patch, in.video->grid.shape()), in.video->stride};
}

LatentVideo to_model_space(const LatentVideo& z, const ModelConfig& c) {
    LatentVideo out = z;
    auto d = out.grid.mutable_data();
    const std::size_t C = z.channels(), HW = z.height() * z.width();
    for (std::size_t t = 0; t < z.time(); ++t)
        for (std::size_t ch = 0; ch < C; ++ch)
            for (std::size_t k = 0; k < HW; ++k) {
                double& v = d[(t * C + ch) * HW + k];
                v = (v - (ch < 3 ? c.latent_dc_mean : 0.0)) / c.latent_std;
            }
    out.grid.normalize();
    return out;
}

LatentVideo from_model_space(const LatentVideo& z, const ModelConfig& c) {
    LatentVideo out = z;
    auto d = out.grid.mutable_data();
    const std::size_t C = z.channels(), HW = z.height() * z.width();
    for (std::size_t t = 0; t < z.time(); ++t)
        for (std::size_t ch = 0; ch < C; ++ch)
            for (std::size_t k = 0; k < HW; ++k) {
                double& v = d[(t * C + ch) * HW + k];
                v = v * c.latent_std + (ch < 3 ? c.latent_dc_mean : 0.0);
            }
    out.grid.normalize();
    return out;
}

}  // namespace wingen
