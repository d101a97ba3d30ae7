#include "wingen/tokens.hpp"

#include <algorithm>

namespace wingen {

std::size_t PositionGrid::count(TokenRole r) const { return static_cast<std::size_t>(std::count(role.begin(), role.end(), r)); }

void PositionGrid::append(const PositionGrid& other) {
    pos.insert(pos.end(), other.pos.begin(), other.pos.end());
    role.insert(role.end(), other.role.begin(), other.role.end());
}

void check_patch_divisible(const Shape& s, Triple p, const char* what) {
    if (s.size() != 4) throw ShapeError(std::string(what) + ": expected [T,C,H,W], got " + shape_str(s));
    if (p.t == 0 || p.h == 0 || p.w == 0 || s[0] % p.t || s[2] % p.h || s[3] % p.w)
        throw ShapeError(std::string(what) + " grid " + shape_str(s) + " not divisible by patch (" +
                         std::to_string(p.t) + "," + std::to_string(p.h) + "," + std::to_string(p.w) + ")");
}

DenseArray patchify(const DenseArray& grid, Triple p) {
    check_patch_divisible(grid.shape(), p, "patchify");
    const std::size_t T = grid.dim(0), C = grid.dim(1), H = grid.dim(2), W = grid.dim(3);
    const std::size_t nt = T / p.t, nh = H / p.h, nw = W / p.w, F = C * p.volume();
    std::vector<double> out(nt * nh * nw * F);
    const auto src = grid.data();
    std::size_t k = 0;
    for (std::size_t ti = 0; ti < nt; ++ti)
        for (std::size_t hi = 0; hi < nh; ++hi)
            for (std::size_t wi = 0; wi < nw; ++wi)
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t dt = 0; dt < p.t; ++dt)
                        for (std::size_t dh = 0; dh < p.h; ++dh)
                            for (std::size_t dw = 0; dw < p.w; ++dw)
                                out[k++] = src[((ti * p.t + dt) * C + c) * H * W + (hi * p.h + dh) * W + wi * p.w + dw];
    return DenseArray({nt * nh * nw, F}, std::move(out), grid.precision());
}

DenseArray unpatchify(const DenseArray& tokens, Triple p, const Shape& gs) {
    check_patch_divisible(gs, p, "unpatchify");
    const std::size_t T = gs[0], C = gs[1], H = gs[2], W = gs[3];
    const std::size_t nt = T / p.t, nh = H / p.h, nw = W / p.w, F = C * p.volume();
    if (tokens.shape() != Shape{nt * nh * nw, F})
        throw ShapeError("unpatchify: tokens " + shape_str(tokens.shape()) + " do not match grid " + shape_str(gs));
    std::vector<double> out(T * C * H * W);
    const auto src = tokens.data();
    std::size_t k = 0;
    for (std::size_t ti = 0; ti < nt; ++ti)
        for (std::size_t hi = 0; hi < nh; ++hi)
            for (std::size_t wi = 0; wi < nw; ++wi)
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t dt = 0; dt < p.t; ++dt)
                        for (std::size_t dh = 0; dh < p.h; ++dh)
                            for (std::size_t dw = 0; dw < p.w; ++dw)
                                out[((ti * p.t + dt) * C + c) * H * W + (hi * p.h + dh) * W + wi * p.w + dw] = src[k++];
    return DenseArray(gs, std::move(out), tokens.precision());
}

PositionGrid grid_positions(std::size_t T, std::size_t H, std::size_t W, Triple p, Triple unit, int t_origin,
                            TokenRole role) {
    PositionGrid g;
    for (std::size_t ti = 0; ti < T / p.t; ++ti)
        for (std::size_t hi = 0; hi < H / p.h; ++hi)
            for (std::size_t wi = 0; wi < W / p.w; ++wi)
                g.push({t_origin + static_cast<int>(ti * p.t), static_cast<int>(hi * p.h / unit.h),
                        static_cast<int>(wi * p.w / unit.w)},
                       role);
    return g;
}

PositionGrid video_positions(std::size_t T, std::size_t H, std::size_t W, Triple p) {
    return grid_positions(T, H, W, p, p, 0, TokenRole::video);
}

PositionGrid reference_positions(std::size_t video_latents, std::size_t H, std::size_t W, Triple p, int ref_offset) {
    if (ref_offset < 1) throw std::invalid_argument("ref_offset must be >= 1, got " + std::to_string(ref_offset));
    return grid_positions(1, H, W, Triple{1, p.h, p.w}, p, static_cast<int>(video_latents) - 1 + ref_offset,
                          TokenRole::reference);
}

}  // namespace wingen
