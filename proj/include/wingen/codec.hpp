#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "wingen/dense_array.hpp"

namespace wingen {

/// (t, h, w) triple used for codec strides and patch sizes.
struct Triple {
    std::size_t t = 1, h = 1, w = 1;
    bool operator==(const Triple&) const = default;
    std::size_t volume() const { return t * h * w; }
};

/// RGB video, shape [time, 3, height, width], values in [0, 1].
struct PixelVideo {
    DenseArray frames;
    double fps = 25.0;

    std::size_t time() const { return frames.rank() == 0 ? 0 : frames.dim(0); }
    std::size_t height() const { return frames.dim(2); }
    std::size_t width() const { return frames.dim(3); }

    /// Frames [t0, t1) as a new video.
    PixelVideo slice(std::size_t t0, std::size_t t1) const;
    static PixelVideo concat(const std::vector<PixelVideo>& parts);
};

/// Latent grid, shape [latent_time, channels, latent_height, latent_width].
struct LatentVideo {
    DenseArray grid;
    Triple stride{4, 16, 16};

    std::size_t time() const { return grid.dim(0); }
    std::size_t channels() const { return grid.dim(1); }
    std::size_t height() const { return grid.dim(2); }
    std::size_t width() const { return grid.dim(3); }

    LatentVideo slice(std::size_t t0, std::size_t t1) const;
};

struct CodecConfig {
    Triple stride{4, 16, 16};
    std::size_t latent_channels = 16;
    std::uint64_t seed = 0x5EED;
};

/// Fixed orthonormal block transform standing in for a video VAE.
///
/// Each stride_t x stride_h x stride_w x 3 pixel block is expanded in a separable basis
/// Q_t (x) Q_h (x) Q_w (x) I_3, where every per-axis basis is the Gram-Schmidt
/// orthonormalization of [constant vector, seeded Gaussian vectors...]. Basis functions
/// are ordered by total axis index (kt + kh + kw, then kt, kh, kw, then colour), so the
/// first three latent channels are the per-colour block means; the first
/// `latent_channels` coefficients form the latent. Encode is therefore an orthogonal
/// projection and decode its adjoint.
class LatentCodec {
public:
    explicit LatentCodec(const CodecConfig& config);
    /// Rebuilds a codec from persisted per-axis bases (row k = k-th basis vector).
    LatentCodec(const CodecConfig& config, DenseArray basis_t, DenseArray basis_h, DenseArray basis_w);

    const CodecConfig& config() const { return config_; }
    std::size_t block_dim() const { return 3 * config_.stride.volume(); }

    LatentVideo encode(const PixelVideo& video) const;
    PixelVideo decode(const LatentVideo& latent, double fps = 25.0) const;
    /// Encodes a single image [3, H, W] as one latent frame (the image repeated stride_t times).
    LatentVideo encode_image(const DenseArray& image) const;

    const DenseArray& basis_t() const { return basis_t_; }
    const DenseArray& basis_h() const { return basis_h_; }
    const DenseArray& basis_w() const { return basis_w_; }

private:
    void build_order();

    CodecConfig config_;
    DenseArray basis_t_, basis_h_, basis_w_;
    // latent channel -> (colour, kt, kh, kw)
    std::vector<std::array<std::size_t, 4>> order_;
};

/// Orthonormal basis of R^n (rows): constant vector first, then Gram-Schmidt on seeded Gaussians.
DenseArray seeded_orthonormal_basis(std::size_t n, std::uint64_t seed);

/// Number of patch tokens a latent produces: prod(latent dim / patch dim).
std::size_t token_count(const LatentVideo& z, const Triple& patch);
/// Token count for a pixel shape [T, H, W] at a given stride and patch, without encoding.
std::size_t token_count(std::size_t frames, std::size_t height, std::size_t width, const Triple& stride,
                        const Triple& patch);

}  // namespace wingen
