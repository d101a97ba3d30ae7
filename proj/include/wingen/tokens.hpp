#pragma once

#include <cstdint>
#include <vector>

#include "wingen/codec.hpp"
#include "wingen/dense_array.hpp"

namespace wingen {

enum class TokenRole : std::uint8_t { context, video, reference };

struct Position {
    int t = 0, h = 0, w = 0;
    bool operator==(const Position&) const = default;
};

/// Integer (t, h, w) position and role of every token in a sequence.
struct PositionGrid {
    std::vector<Position> pos;
    std::vector<TokenRole> role;

    std::size_t size() const { return pos.size(); }
    std::size_t count(TokenRole r) const;
    void append(const PositionGrid& other);
    void push(Position p, TokenRole r) {
        pos.push_back(p);
        role.push_back(r);
    }
};

/// [T, C, H, W] -> [(T/pt)(H/ph)(W/pw), C*pt*ph*pw]; tokens in (t, h, w) order, features
/// in (c, dt, dh, dw) order.
DenseArray patchify(const DenseArray& grid, Triple patch);
DenseArray unpatchify(const DenseArray& tokens, Triple patch, const Shape& grid_shape);

/// Positions of the patch tokens of a [T, *, H, W] grid. t_pos = t_origin + first latent
/// index covered; h_pos/w_pos are the first covered latent row/column divided by the
/// `unit` patch, so coarse tokens share the fine grid's coordinates.
PositionGrid grid_positions(std::size_t T, std::size_t H, std::size_t W, Triple patch, Triple unit, int t_origin,
                            TokenRole role);

/// Video tokens at t_pos 0..T-1.
PositionGrid video_positions(std::size_t T, std::size_t H, std::size_t W, Triple patch);
/// The video's spatial grid at t_pos = video_latents - 1 + ref_offset.
PositionGrid reference_positions(std::size_t video_latents, std::size_t H, std::size_t W, Triple patch, int ref_offset);

void check_patch_divisible(const Shape& grid_shape, Triple patch, const char* what);

}  // namespace wingen
