#include "wingen/codec.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "wingen/rng.hpp"

namespace wingen {

PixelVideo PixelVideo::slice(std::size_t t0, std::size_t t1) const {
    if (t0 > t1 || t1 > time())
        throw ShapeError("frame slice [" + std::to_string(t0) + "," + std::to_string(t1) + ") outside video of " +
                         std::to_string(time()) + " frames");
    const std::size_t per = 3 * height() * width();
    std::vector<double> d(frames.data().begin() + t0 * per, frames.data().begin() + t1 * per);
    return PixelVideo{DenseArray({t1 - t0, 3, height(), width()}, std::move(d), frames.precision()), fps};
}

PixelVideo PixelVideo::concat(const std::vector<PixelVideo>& parts) {
    if (parts.empty()) throw ShapeError("concat of no videos");
    const auto& f = parts.front();
    std::vector<double> d;
    std::size_t t = 0;
    for (const auto& p : parts) {
        if (p.height() != f.height() || p.width() != f.width())
            throw ShapeError("concat of videos with different frame sizes");
        d.insert(d.end(), p.frames.data().begin(), p.frames.data().end());
        t += p.time();
    }
    return PixelVideo{DenseArray({t, 3, f.height(), f.width()}, std::move(d), f.frames.precision()), f.fps};
}

LatentVideo LatentVideo::slice(std::size_t t0, std::size_t t1) const {
    if (t0 > t1 || t1 > time()) throw ShapeError("latent slice out of range");
    const std::size_t per = channels() * height() * width();
    std::vector<double> d(grid.data().begin() + t0 * per, grid.data().begin() + t1 * per);
    return LatentVideo{DenseArray({t1 - t0, channels(), height(), width()}, std::move(d), grid.precision()), stride};
}

DenseArray seeded_orthonormal_basis(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows;
    rows.reserve(n);
    std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
    rows.push_back(v);
    while (rows.size() < n) {
        for (auto& x : v) x = rng.normal();
        // modified Gram-Schmidt, two passes
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : rows) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += q[i] * v[i];
                for (std::size_t i = 0; i < n; ++i) v[i] -= dot * q[i];
            }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-8) continue;
        for (auto& x : v) x /= norm;
        rows.push_back(v);
    }
    std::vector<double> flat;
    flat.reserve(n * n);
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return DenseArray({n, n}, std::move(flat), Precision::double_);
}

LatentCodec::LatentCodec(const CodecConfig& config)
    : LatentCodec(config, seeded_orthonormal_basis(config.stride.t, config.seed * 3 + 1),
                  seeded_orthonormal_basis(config.stride.h, config.seed * 3 + 2),
                  seeded_orthonormal_basis(config.stride.w, config.seed * 3 + 3)) {}

LatentCodec::LatentCodec(const CodecConfig& config, DenseArray basis_t, DenseArray basis_h, DenseArray basis_w)
    : config_(config), basis_t_(std::move(basis_t)), basis_h_(std::move(basis_h)), basis_w_(std::move(basis_w)) {
    const auto& s = config_.stride;
    if (basis_t_.shape() != Shape{s.t, s.t} || basis_h_.shape() != Shape{s.h, s.h} ||
        basis_w_.shape() != Shape{s.w, s.w})
        throw ShapeError("codec basis shapes do not match stride");
    if (config_.latent_channels == 0 || config_.latent_channels > block_dim())
        throw std::invalid_argument("latent_channels must lie in [1, " + std::to_string(block_dim()) + "]");
    build_order();
}

void LatentCodec::build_order() {
    const auto& s = config_.stride;
    std::vector<std::array<std::size_t, 4>> all;
    all.reserve(block_dim());
    for (std::size_t kt = 0; kt < s.t; ++kt)
        for (std::size_t kh = 0; kh < s.h; ++kh)
            for (std::size_t kw = 0; kw < s.w; ++kw)
                for (std::size_t c = 0; c < 3; ++c) all.push_back({c, kt, kh, kw});
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return std::make_tuple(a[1] + a[2] + a[3], a[1], a[2], a[3], a[0]) <
               std::make_tuple(b[1] + b[2] + b[3], b[1], b[2], b[3], b[0]);
    });
    order_.assign(all.begin(), all.begin() + static_cast<long>(config_.latent_channels));
}

namespace {
void check_video(const PixelVideo& v, const Triple& s) {
    if (v.frames.rank() != 4 || v.frames.dim(1) != 3)
        throw ShapeError("pixel video must be [T,3,H,W], got " + shape_str(v.frames.shape()));
    if (v.time() % s.t != 0)
        throw ShapeError("time axis (" + std::to_string(v.time()) + " frames) not divisible by stride " +
                         std::to_string(s.t));
    if (v.height() % s.h != 0)
        throw ShapeError("height axis (" + std::to_string(v.height()) + ") not divisible by stride " +
                         std::to_string(s.h));
    if (v.width() % s.w != 0)
        throw ShapeError("width axis (" + std::to_string(v.width()) + ") not divisible by stride " +
                         std::to_string(s.w));
}
}  // namespace

LatentVideo LatentCodec::encode(const PixelVideo& video) const {
    const auto& s = config_.stride;
    check_video(video, s);
    const std::size_t T = video.time(), H = video.height(), W = video.width();
    const std::size_t lt = T / s.t, lh = H / s.h, lw = W / s.w, C = config_.latent_channels;
    const auto& X = video.frames;
    std::vector<double> out(lt * C * lh * lw, 0.0);
    // per block: separable forward transform into coef[c][kt][kh][kw]
    std::vector<double> blk(3 * s.t * s.h * s.w), tmp1(blk.size()), tmp2(blk.size());
    auto idx = [&](std::size_t c, std::size_t a, std::size_t b, std::size_t d) {
        return ((c * s.t + a) * s.h + b) * s.w + d;
    };
    for (std::size_t bt = 0; bt < lt; ++bt)
        for (std::size_t bh = 0; bh < lh; ++bh)
            for (std::size_t bw = 0; bw < lw; ++bw) {
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t t = 0; t < s.t; ++t)
                        for (std::size_t h = 0; h < s.h; ++h)
                            for (std::size_t w = 0; w < s.w; ++w)
                                blk[idx(c, t, h, w)] =
                                    X[((bt * s.t + t) * 3 + c) * H * W + (bh * s.h + h) * W + bw * s.w + w];
                // w axis
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t t = 0; t < s.t; ++t)
                        for (std::size_t h = 0; h < s.h; ++h)
                            for (std::size_t k = 0; k < s.w; ++k) {
                                double acc = 0.0;
                                for (std::size_t w = 0; w < s.w; ++w) acc += basis_w_.at(k, w) * blk[idx(c, t, h, w)];
                                tmp1[idx(c, t, h, k)] = acc;
                            }
                // h axis
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t t = 0; t < s.t; ++t)
                        for (std::size_t k = 0; k < s.h; ++k)
                            for (std::size_t w = 0; w < s.w; ++w) {
                                double acc = 0.0;
                                for (std::size_t h = 0; h < s.h; ++h) acc += basis_h_.at(k, h) * tmp1[idx(c, t, h, w)];
                                tmp2[idx(c, t, k, w)] = acc;
                            }
                // t axis, only for the selected coefficients
                for (std::size_t ch = 0; ch < C; ++ch) {
                    const auto [c, kt, kh, kw] = order_[ch];
                    double acc = 0.0;
                    for (std::size_t t = 0; t < s.t; ++t) acc += basis_t_.at(kt, t) * tmp2[idx(c, t, kh, kw)];
                    out[((bt * C + ch) * lh + bh) * lw + bw] = acc;
                }
            }
    return LatentVideo{DenseArray({lt, C, lh, lw}, std::move(out), video.frames.precision()), s};
}

PixelVideo LatentCodec::decode(const LatentVideo& latent, double fps) const {
    const auto& s = config_.stride;
    if (!(latent.stride == s))
        throw ShapeError("latent stride does not match codec stride");
    if (latent.grid.rank() != 4 || latent.channels() != config_.latent_channels)
        throw ShapeError("latent grid " + shape_str(latent.grid.shape()) + " does not carry " +
                         std::to_string(config_.latent_channels) + " channels");
    const std::size_t lt = latent.time(), lh = latent.height(), lw = latent.width(), C = config_.latent_channels;
    const std::size_t T = lt * s.t, H = lh * s.h, W = lw * s.w;
    std::vector<double> out(T * 3 * H * W, 0.0);
    std::vector<double> coef(3 * s.t * s.h * s.w), tmp1(coef.size()), tmp2(coef.size());
    auto idx = [&](std::size_t c, std::size_t a, std::size_t b, std::size_t d) {
        return ((c * s.t + a) * s.h + b) * s.w + d;
    };
    const auto& Z = latent.grid;
    for (std::size_t bt = 0; bt < lt; ++bt)
        for (std::size_t bh = 0; bh < lh; ++bh)
            for (std::size_t bw = 0; bw < lw; ++bw) {
                std::fill(coef.begin(), coef.end(), 0.0);
                for (std::size_t ch = 0; ch < C; ++ch) {
                    const auto [c, kt, kh, kw] = order_[ch];
                    coef[idx(c, kt, kh, kw)] = Z[((bt * C + ch) * lh + bh) * lw + bw];
                }
                // inverse along t, h, w (transpose of each orthonormal basis)
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t t = 0; t < s.t; ++t)
                        for (std::size_t kh = 0; kh < s.h; ++kh)
                            for (std::size_t kw = 0; kw < s.w; ++kw) {
                                double acc = 0.0;
                                for (std::size_t kt = 0; kt < s.t; ++kt)
                                    acc += basis_t_.at(kt, t) * coef[idx(c, kt, kh, kw)];
                                tmp1[idx(c, t, kh, kw)] = acc;
                            }
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t t = 0; t < s.t; ++t)
                        for (std::size_t h = 0; h < s.h; ++h)
                            for (std::size_t kw = 0; kw < s.w; ++kw) {
                                double acc = 0.0;
                                for (std::size_t kh = 0; kh < s.h; ++kh)
                                    acc += basis_h_.at(kh, h) * tmp1[idx(c, t, kh, kw)];
                                tmp2[idx(c, t, h, kw)] = acc;
                            }
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t t = 0; t < s.t; ++t)
                        for (std::size_t h = 0; h < s.h; ++h)
                            for (std::size_t w = 0; w < s.w; ++w) {
                                double acc = 0.0;
                                for (std::size_t kw = 0; kw < s.w; ++kw)
                                    acc += basis_w_.at(kw, w) * tmp2[idx(c, t, h, kw)];
                                out[((bt * s.t + t) * 3 + c) * H * W + (bh * s.h + h) * W + bw * s.w + w] = acc;
                            }
            }
    return PixelVideo{DenseArray({T, 3, H, W}, std::move(out), latent.grid.precision()), fps};
}

LatentVideo LatentCodec::encode_image(const DenseArray& image) const {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw ShapeError("image must be [3,H,W], got " + shape_str(image.shape()));
    const std::size_t st = config_.stride.t;
    std::vector<double> d;
    d.reserve(st * image.size());
    for (std::size_t i = 0; i < st; ++i) d.insert(d.end(), image.data().begin(), image.data().end());
    PixelVideo v{DenseArray({st, 3, image.dim(1), image.dim(2)}, std::move(d), image.precision()), 25.0};
    return encode(v);
}

std::size_t token_count(const LatentVideo& z, const Triple& patch) {
    if (patch.t == 0 || patch.h == 0 || patch.w == 0) throw ShapeError("patch dims must be positive");
    if (z.time() % patch.t) throw ShapeError("latent time " + std::to_string(z.time()) + " not divisible by patch " + std::to_string(patch.t));
    if (z.height() % patch.h) throw ShapeError("latent height " + std::to_string(z.height()) + " not divisible by patch " + std::to_string(patch.h));
    if (z.width() % patch.w) throw ShapeError("latent width " + std::to_string(z.width()) + " not divisible by patch " + std::to_string(patch.w));
    return (z.time() / patch.t) * (z.height() / patch.h) * (z.width() / patch.w);
}

std::size_t token_count(std::size_t frames, std::size_t height, std::size_t width, const Triple& stride,
                        const Triple& patch) {
    if (frames % stride.t || height % stride.h || width % stride.w)
        throw ShapeError("pixel shape not divisible by stride");
    const std::size_t lt = frames / stride.t, lh = height / stride.h, lw = width / stride.w;
    if (lt % patch.t || lh % patch.h || lw % patch.w) throw ShapeError("latent shape not divisible by patch");
    return (lt / patch.t) * (lh / patch.h) * (lw / patch.w);
}

}  // namespace wingen
