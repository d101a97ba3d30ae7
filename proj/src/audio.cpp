#include "wingen/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "wingen/ops.hpp"
#include "wingen/rng.hpp"

namespace wingen {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error(path + ": truncated audio header");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

}  // namespace

void write_audio(const std::string& path, const AudioTrack& track) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write("WGA1", 4);
    put_u32(os, track.sample_rate);
    put_u32(os, static_cast<std::uint32_t>(track.samples.size()));
    for (double x : track.samples) {
        const float f = static_cast<float>(x);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(os, bits);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

AudioTrack read_audio(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "WGA1", 4) != 0)
        throw std::runtime_error(path + ": not a WGA1 audio file");
    AudioTrack t;
    t.sample_rate = get_u32(is, path);
    if (t.sample_rate == 0) throw std::runtime_error(path + ": zero sample rate");
    const std::uint32_t n = get_u32(is, path);
    t.samples.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t bits = get_u32(is, path);
        float f;
        std::memcpy(&f, &bits, 4);
        t.samples[i] = f;
    }
    return t;
}

std::size_t samples_per_frame(std::uint32_t sample_rate, double frame_rate) {
    const double spf = static_cast<double>(sample_rate) / frame_rate;
    if (frame_rate <= 0 || spf != std::floor(spf) || spf < 1)
        throw std::invalid_argument("sample_rate / frame_rate must be a positive integer (got " +
                                    std::to_string(spf) + ")");
    return static_cast<std::size_t>(spf);
}

std::size_t AudioTrack::frame_count(double frame_rate) const {
    return samples.size() / samples_per_frame(sample_rate, frame_rate);
}

AudioTrack AudioTrack::slice_frames(std::size_t f0, std::size_t f1, double frame_rate) const {
    const std::size_t spf = samples_per_frame(sample_rate, frame_rate);
    if (f0 > f1 || f1 * spf > samples.size())
        throw std::out_of_range("audio slice [" + std::to_string(f0) + "," + std::to_string(f1) +
                                ") exceeds " + std::to_string(frame_count(frame_rate)) + " frames");
    return AudioTrack{std::vector<double>(samples.begin() + f0 * spf, samples.begin() + f1 * spf), sample_rate};
}

std::vector<double> energy_envelope(const AudioTrack& track, double frame_rate) {
    const std::size_t spf = samples_per_frame(track.sample_rate, frame_rate);
    const std::size_t n = track.samples.size() / spf;
    std::vector<double> env(n);
    for (std::size_t f = 0; f < n; ++f) {
        double s = 0.0;
        for (std::size_t i = 0; i < spf; ++i) {
            const double x = track.samples[f * spf + i];
            s += x * x;
        }
        env[f] = std::sqrt(s / static_cast<double>(spf));
    }
    return env;
}

std::vector<DenseArray> extract_layers(const AudioTrack& track, double frame_rate, const AudioFeatureConfig& config) {
    const std::size_t spf = samples_per_frame(track.sample_rate, frame_rate);
    const std::size_t frames = track.samples.size() / spf;
    const std::size_t B = config.bands;
    const double bin_hz = static_cast<double>(track.sample_rate) / static_cast<double>(spf);

    // DFT bins grouped into bands of band_width_hz (DC excluded)
    std::vector<std::vector<std::size_t>> band_bins(B);
    for (std::size_t k = 1; k < spf / 2; ++k) {
        const auto b = static_cast<std::size_t>(static_cast<double>(k) * bin_hz / config.band_width_hz);
        if (b < B) band_bins[b].push_back(k);
    }
    std::vector<double> cos_tab(spf), sin_tab(spf);
    for (std::size_t i = 0; i < spf; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(spf);
        cos_tab[i] = std::cos(a);
        sin_tab[i] = std::sin(a);
    }

    // band power per frame: sum over band bins of 2|X_k|^2 / N^2 (one-sided mean power)
    std::vector<double> power(frames * B, 0.0);
    const double n2 = static_cast<double>(spf) * static_cast<double>(spf);
    for (std::size_t f = 0; f < frames; ++f) {
        const double* x = track.samples.data() + f * spf;
        bool silent = true;
        for (std::size_t i = 0; i < spf && silent; ++i) silent = x[i] == 0.0;
        if (silent) continue;
        for (std::size_t b = 0; b < B; ++b) {
            double acc = 0.0;
            for (std::size_t k : band_bins[b]) {
                double re = 0.0, im = 0.0;
                std::size_t idx = 0;
                for (std::size_t i = 0; i < spf; ++i) {
                    re += x[i] * cos_tab[idx];
                    im -= x[i] * sin_tab[idx];
                    idx += k;
                    if (idx >= spf) idx -= spf;
                }
                acc += 2.0 * (re * re + im * im) / n2;
            }
            power[f * B + b] = acc;
        }
    }

    std::vector<DenseArray> layers;
    for (std::size_t w : config.layer_windows) {
        std::vector<double> out(frames * B, 0.0);
        for (std::size_t f = 0; f < frames; ++f)
            for (std::size_t b = 0; b < B; ++b) {
                double acc = 0.0;
                const std::size_t lo = f + 1 >= w ? f + 1 - w : 0;
                for (std::size_t g = lo; g <= f; ++g) acc += power[g * B + b];
                out[f * B + b] = std::log1p(config.log_gain * acc / static_cast<double>(w));
            }
        layers.emplace_back(Shape{frames, B}, std::move(out), Precision::double_);
    }
    return layers;
}

AudioWindow audio_window(const std::vector<DenseArray>& layers, long start, std::size_t frames, std::size_t history) {
    AudioWindow w;
    w.history = history;
    for (const auto& layer : layers) {
        const std::size_t total = layer.dim(0), B = layer.dim(1);
        if (start < 0 || static_cast<std::size_t>(start) + frames > total)
            throw std::out_of_range("audio window [" + std::to_string(start) + "," +
                                    std::to_string(start + static_cast<long>(frames)) + ") exceeds " +
                                    std::to_string(total) + " feature frames");
        std::vector<double> d((history + frames) * B, 0.0);
        for (std::size_t r = 0; r < history + frames; ++r) {
            const long src = start - static_cast<long>(history) + static_cast<long>(r);
            if (src < 0) continue;
            std::copy_n(layer.data().begin() + src * static_cast<long>(B), B, d.begin() + r * B);
        }
        w.layers.emplace_back(Shape{history + frames, B}, std::move(d), layer.precision());
    }
    return w;
}

void init_audio_params(ModelParams& params, std::size_t layers, std::size_t bands, const AudioCompressConfig& c,
                       std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t D = c.audio_dim;
    params.add("audio.layer_logits", DenseArray({1, layers}, Precision::double_), ParamRole::full);
    params.add("audio.proj.w", rng.normal_array({bands, D}, Precision::double_, 1.0 / std::sqrt(double(bands))),
               ParamRole::full);
    params.add("audio.proj.b", DenseArray({1, D}, Precision::double_), ParamRole::full);
    params.add("audio.conv.w",
               rng.normal_array({c.kernel * D, c.tokens_per_latent * D}, Precision::double_,
                                1.0 / std::sqrt(double(c.kernel * D))),
               ParamRole::full);
    params.add("audio.conv.b", DenseArray({1, c.tokens_per_latent * D}, Precision::double_), ParamRole::full);
}

Var aggregate_and_compress(ParamBinder& bind, const AudioWindow& window, const AudioCompressConfig& c) {
    if (window.layers.empty()) throw std::invalid_argument("no audio feature layers");
    const std::size_t rows = window.layers.front().dim(0);
    for (const auto& l : window.layers)
        if (l.dim(0) != rows)
            throw ShapeError("audio layers disagree on frame count: " + std::to_string(l.dim(0)) + " vs " +
                             std::to_string(rows));
    const std::size_t frames = window.frames();
    if (frames % c.stride_t != 0)
        throw ShapeError("audio frame count " + std::to_string(frames) + " not divisible by stride " +
                         std::to_string(c.stride_t));
    Tape& tape = bind.tape();

    Var weights = ops::softmax_rows(bind.get("audio.layer_logits"));
    if (weights.value().size() != window.layers.size())
        throw ShapeError("layer_logits has " + std::to_string(weights.value().size()) + " entries for " +
                         std::to_string(window.layers.size()) + " layers");
    Var fused;
    for (std::size_t l = 0; l < window.layers.size(); ++l) {
        Var term = ops::scale_by(tape.constant(window.layers[l]), ops::slice_cols(weights, l, l + 1));
        fused = l == 0 ? term : ops::add(fused, term);
    }
    Var h = ops::silu(bind.linear(fused, "audio.proj"));

    // causal im2col: latent t reads window frames [(t+1)*s - kernel, (t+1)*s)
    const std::size_t lat = frames / c.stride_t;
    std::vector<long> idx;
    idx.reserve(lat * c.kernel);
    for (std::size_t t = 0; t < lat; ++t)
        for (std::size_t k = 0; k < c.kernel; ++k) {
            const long f = static_cast<long>((t + 1) * c.stride_t) - static_cast<long>(c.kernel) + static_cast<long>(k);
            const long row = f + static_cast<long>(window.history);
            idx.push_back(row < 0 ? -1 : row);
        }
    Var cols = ops::reshape(ops::gather_rows(h, idx), {lat, c.kernel * c.audio_dim});
    Var out = bind.linear(cols, "audio.conv");
    return ops::reshape(out, {lat * c.tokens_per_latent, c.audio_dim});
}

AudioTrackFeatures compute_audio_features(const ModelParams& params, const AudioWindow& window,
                                          const AudioCompressConfig& c) {
    Tape tape(params.get("audio.proj.w").precision(), false);
    ParamBinder bind(tape, params, nullptr, GradScope::none);
    Var tokens = aggregate_and_compress(bind, window, c);
    const std::size_t lat = window.frames() / c.stride_t;
    return AudioTrackFeatures{tokens.value().reshaped({lat, c.tokens_per_latent, c.audio_dim}),
                              softmax_rows(params.get("audio.layer_logits")).reshaped({params.get("audio.layer_logits").size()})};
}

}  // namespace wingen
