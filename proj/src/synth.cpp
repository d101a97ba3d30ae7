#include "wingen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "wingen/rng.hpp"

namespace wingen {

namespace {

struct Ellipse {
    double cy, cx, ry, rx;
    double r2(double y, double x) const {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        return dy * dy + dx * dx;
    }
    Box bounds() const {
        return Box{static_cast<int>(std::floor(cy - ry)), static_cast<int>(std::floor(cx - rx)),
                   static_cast<int>(std::ceil(cy + ry)) + 1, static_cast<int>(std::ceil(cx + rx)) + 1};
    }
};

Box clip(Box b, std::size_t H, std::size_t W) {
    b.y0 = std::clamp(b.y0, 0, static_cast<int>(H));
    b.y1 = std::clamp(b.y1, 0, static_cast<int>(H));
    b.x0 = std::clamp(b.x0, 0, static_cast<int>(W));
    b.x1 = std::clamp(b.x1, 0, static_cast<int>(W));
    return b;
}

// soft-edged disc weight: 1 inside, linear fall-off over the outer third
double soft(double r2) { return std::clamp((1.0 - r2) * 3.0, 0.0, 1.0); }

DenseArray box_masks(const Box& b, std::size_t T, std::size_t H, std::size_t W) {
    DenseArray m({T, H, W}, Precision::single);
    auto d = m.mutable_data();
    for (std::size_t t = 0; t < T; ++t)
        for (int y = b.y0; y < b.y1; ++y)
            for (int x = b.x0; x < b.x1; ++x) d[(t * H + y) * W + x] = 1.0;
    return m;
}

const char* kPrompts[] = {"a person talking to the camera", "a presenter speaking calmly",
                          "someone explaining an idea", "a speaker in a studio"};

}  // namespace

FixtureRecord make_fixture(const FixtureSpec& s) {
    if (s.height % 16 || s.width % 16 || s.height < 32 || s.width < 32)
        throw std::invalid_argument("fixture resolution " + std::to_string(s.height) + "x" + std::to_string(s.width) +
                                    " must be a multiple of 16 and at least 32");
    if (s.frames == 0 || s.block_frames == 0) throw std::invalid_argument("fixture needs frames and block_frames > 0");
    const std::size_t spf = samples_per_frame(s.sample_rate, s.fps);
    Rng rng(s.seed);
    Rng look = rng.fork(1), sound = rng.fork(2);

    // per-frame audio RMS levels over a padded range so a delay can shift them
    const int pad = std::abs(s.audio_delay);
    const std::size_t span = s.frames + 2 * static_cast<std::size_t>(pad);
    std::vector<double> level(span, 0.0);
    if (!s.silent) {
        const std::size_t blocks = (span + s.block_frames - 1) / s.block_frames;
        std::vector<double> per_block(blocks);
        for (std::size_t b = 0; b < blocks; ++b)
            per_block[b] = s.burst_levels.empty() ? s.max_level * sound.uniform()
                                                  : s.burst_levels[b % s.burst_levels.size()];
        for (std::size_t f = 0; f < span; ++f) level[f] = per_block[f / s.block_frames];
    }
    // video frame f shows level[f + pad]; audio frame f carries level[f + pad - delay]

    FixtureRecord fx;
    fx.prompt = kPrompts[look.below(4)];
    const double H = static_cast<double>(s.height), W = static_cast<double>(s.width);
    const double sy = H / 64.0, sx = W / 64.0;
    const double jx = static_cast<double>(look.below(5)) - 2.0, jy = static_cast<double>(look.below(3));
    const Ellipse head{(28 + jy) * sy, (24 + jx) * sx, 17 * sy, 12 * sx};
    const Ellipse body{(62 + jy) * sy, (24 + jx) * sx, 18 * sy, 20 * sx};
    const Ellipse mouth{(38 + jy) * sy, (24 + jx) * sx, 4 * sy, 6 * sx};
    const Ellipse eyes[2] = {{(22 + jy) * sy, (19 + jx) * sx, 1.5 * sy, 1.5 * sx},
                             {(22 + jy) * sy, (29 + jx) * sx, 1.5 * sy, 1.5 * sx}};
    double bg[3], skin[3], shirt[3];
    for (int c = 0; c < 3; ++c) {
        bg[c] = 0.15 + 0.25 * look.uniform();
        shirt[c] = 0.2 + 0.5 * look.uniform();
    }
    const double tone = 0.55 + 0.2 * look.uniform();
    skin[0] = tone;
    skin[1] = tone * 0.8;
    skin[2] = tone * 0.65;
    const double mouth_rgb[3] = {0.45, 0.35, 0.3};

    fx.face = clip(head.bounds(), s.height, s.width);
    fx.mouth = clip(mouth.bounds(), s.height, s.width);
    Box bb = body.bounds();
    fx.body = clip(Box{std::min(bb.y0, fx.face.y0), std::min(bb.x0, fx.face.x0), std::max(bb.y1, fx.face.y1),
                       std::max(bb.x1, fx.face.x1)},
                   s.height, s.width);

    const std::size_t T = s.frames, Hn = s.height, Wn = s.width;
    std::vector<double> still(3 * Hn * Wn), mouth_w(Hn * Wn);
    for (std::size_t y = 0; y < Hn; ++y)
        for (std::size_t x = 0; x < Wn; ++x) {
            const double py = static_cast<double>(y) + 0.5, px = static_cast<double>(x) + 0.5;
            const double wb = soft(body.r2(py, px)), wh = soft(head.r2(py, px));
            double we = 0;
            for (const auto& e : eyes) we = std::max(we, soft(e.r2(py, px)));
            for (int c = 0; c < 3; ++c) {
                double v = bg[c] + 0.1 * py / H;
                v = v * (1 - wb) + shirt[c] * wb;
                v = v * (1 - wh) + skin[c] * wh;
                v = v * (1 - we) + 0.05 * we;
                still[(c * Hn + y) * Wn + x] = v;
            }
            mouth_w[y * Wn + x] = soft(mouth.r2(py, px)) * wh;
        }

    std::vector<double> pix(T * 3 * Hn * Wn);
    fx.aperture.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const double a = std::clamp(s.gain * level[t + pad], 0.0, 1.0);
        fx.aperture[t] = a;
        for (int c = 0; c < 3; ++c)
            for (std::size_t k = 0; k < Hn * Wn; ++k)
                pix[(t * 3 + c) * Hn * Wn + k] =
                    std::clamp(still[c * Hn * Wn + k] + a * mouth_rgb[c] * mouth_w[k], 0.0, 1.0);
    }
    fx.video = PixelVideo{DenseArray({T, 3, Hn, Wn}, std::move(pix), Precision::single), s.fps};

    // harmonics at multiples of 25 Hz complete whole cycles per frame, so the frame RMS is
    // exactly the planned level
    const std::size_t harmonics = 4;
    std::vector<double> freq(harmonics), phase(harmonics), amp(harmonics);
    double norm = 0;
    for (std::size_t k = 0; k < harmonics; ++k) {
        freq[k] = s.fps * static_cast<double>(4 + sound.below(56));
        phase[k] = 2 * std::numbers::pi * sound.uniform();
        amp[k] = 0.5 + sound.uniform();
        norm += amp[k] * amp[k];
    }
    for (auto& a : amp) a *= std::sqrt(2.0 / norm);
    fx.audio.sample_rate = s.sample_rate;
    fx.audio.samples.resize(T * spf);
    for (std::size_t t = 0; t < T; ++t) {
        const double lv = level[t + pad - s.audio_delay];
        for (std::size_t i = 0; i < spf; ++i) {
            const double time = static_cast<double>(t * spf + i) / s.sample_rate;
            double v = 0;
            for (std::size_t k = 0; k < harmonics; ++k) v += amp[k] * std::sin(2 * std::numbers::pi * freq[k] * time + phase[k]);
            fx.audio.samples[t * spf + i] = static_cast<float>(lv * v);
        }
    }
    fx.envelope = energy_envelope(fx.audio, s.fps);
    fx.face_mask = box_masks(fx.face, T, Hn, Wn);
    fx.body_mask = box_masks(fx.body, T, Hn, Wn);
    return fx;
}

DenseArray latent_mask(const Box& b, std::size_t H, std::size_t W, Triple stride) {
    const std::size_t h = H / stride.h, w = W / stride.w;
    DenseArray m({h, w}, Precision::double_);
    if (b.empty()) return m;
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const int y0 = static_cast<int>(i * stride.h), x0 = static_cast<int>(j * stride.w);
            const bool overlap = b.y0 < y0 + static_cast<int>(stride.h) && b.y1 > y0 &&
                                 b.x0 < x0 + static_cast<int>(stride.w) && b.x1 > x0;
            if (overlap) m.mutable_data()[i * w + j] = 1.0;
        }
    return m;
}

std::vector<double> region_intensity(const PixelVideo& v, const Box& r) {
    if (r.empty()) throw std::invalid_argument("empty measurement region");
    const std::size_t T = v.time(), H = v.height(), W = v.width();
    if (r.y0 < 0 || r.x0 < 0 || r.y1 > static_cast<int>(H) || r.x1 > static_cast<int>(W))
        throw std::invalid_argument("measurement region outside the frame");
    std::vector<double> out(T);
    const auto d = v.frames.data();
    const double n = 3.0 * (r.y1 - r.y0) * (r.x1 - r.x0);
    for (std::size_t t = 0; t < T; ++t) {
        double s = 0;
        for (std::size_t c = 0; c < 3; ++c)
            for (int y = r.y0; y < r.y1; ++y)
                for (int x = r.x0; x < r.x1; ++x) s += d[((t * 3 + c) * H + y) * W + x];
        out[t] = s / n;
    }
    return out;
}

Correlation pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
    const double n = static_cast<double>(a.size());
    if (a.empty()) return {0.0, true};
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    // relative threshold: float rendering leaves ~1e-7 jitter on "constant" signals
    const double tiny = 1e-18 * n;
    if (saa <= tiny || sbb <= tiny) return {0.0, true};
    return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

Correlation sync_correlation(const PixelVideo& video, const AudioTrack& audio, const Box& region) {
    auto env = energy_envelope(audio, video.fps);
    if (env.size() != video.time())
        throw std::invalid_argument("audio covers " + std::to_string(env.size()) + " frames, video has " +
                                    std::to_string(video.time()));
    return pearson(region_intensity(video, region), env);
}

SyncOffset sync_offset(const PixelVideo& video, const AudioTrack& audio, const Box& region, int max_offset) {
    const auto v = region_intensity(video, region);
    const auto e = energy_envelope(audio, video.fps);
    const int T = static_cast<int>(std::min(v.size(), e.size()));
    if (max_offset < 1 || T <= 2 * max_offset)
        throw std::invalid_argument("sync_offset needs more than " + std::to_string(2 * max_offset) + " frames, got " +
                                    std::to_string(T));
    SyncOffset out;
    std::vector<double> z;
    for (int k = -max_offset; k <= max_offset; ++k) {
        std::vector<double> a, b;
        for (int f = 0; f < T; ++f)
            if (f + k >= 0 && f + k < T) {
                a.push_back(v[f]);
                b.push_back(e[f + k]);
            }
        const double r = pearson(a, b).r;
        out.curve.push_back(r);
        z.push_back(std::atanh(std::clamp(r, -0.999, 0.999)));
    }
    const auto peak = std::max_element(out.curve.begin(), out.curve.end()) - out.curve.begin();
    out.offset = static_cast<int>(peak) - max_offset;
    double rest = 0;
    for (std::size_t i = 0; i < z.size(); ++i)
        if (static_cast<long>(i) != peak) rest += z[i];
    out.confidence = z[peak] - rest / static_cast<double>(z.size() - 1);
    return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error(path + ": truncated video file");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

std::uint32_t f32_bits(double x) {
    const float f = static_cast<float>(x);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    return bits;
}

float bits_f32(std::uint32_t bits) {
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

}  // namespace

void write_video(const std::string& path, const PixelVideo& v) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write("WGV1", 4);
    for (std::size_t d : v.frames.shape()) put_u32(os, static_cast<std::uint32_t>(d));
    put_u32(os, f32_bits(v.fps));
    for (double x : v.frames.data()) put_u32(os, f32_bits(x));
    if (!os) throw std::runtime_error("write failed: " + path);
}

PixelVideo read_video(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "WGV1", 4) != 0) throw std::runtime_error(path + ": not a WGV1 video");
    Shape s(4);
    for (auto& d : s) d = get_u32(is, path);
    if (s[1] != 3) throw std::runtime_error(path + ": expected 3 colour planes");
    const double fps = bits_f32(get_u32(is, path));
    std::vector<double> data(shape_numel(s));
    for (auto& x : data) x = bits_f32(get_u32(is, path));
    return PixelVideo{DenseArray(s, std::move(data), Precision::single), fps};
}

void write_fixture_records(const std::string& path, const FixtureRecord& fx) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    auto box = [](const Box& b) { return nlohmann::json{{"y0", b.y0}, {"x0", b.x0}, {"y1", b.y1}, {"x1", b.x1}}; };
    os << nlohmann::json{{"record", "boxes"}, {"face", box(fx.face)}, {"body", box(fx.body)}, {"mouth", box(fx.mouth)},
                         {"prompt", fx.prompt}}
              .dump()
       << "\n";
    for (std::size_t t = 0; t < fx.aperture.size(); ++t)
        os << nlohmann::json{{"record", "frame"}, {"frame", t}, {"aperture", fx.aperture[t]}, {"envelope", fx.envelope[t]}}
                  .dump()
           << "\n";
}

}  // namespace wingen
