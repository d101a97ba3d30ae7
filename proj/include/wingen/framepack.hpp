#pragma once

#include <optional>
#include <vector>

#include "wingen/params.hpp"
#include "wingen/tokens.hpp"

namespace wingen {

/// One recency tier. frames == 0 means "all remaining latents".
struct PackBucket {
    std::size_t frames = 0;
    Triple patch{1, 2, 2};
    bool operator==(const PackBucket&) const = default;
};

/// Tiers listed from the most recent latent backwards.
struct PackPlan {
    std::vector<PackBucket> buckets{{1, {1, 2, 2}}, {0, {2, 4, 4}}};

    static PackPlan uniform(Triple patch) { return PackPlan{{{0, patch}}}; }
};

/// Latent frames actually assigned to each bucket for a context of `latents` frames.
/// Buckets that receive nothing are dropped from the oldest end.
std::vector<std::size_t> resolve_buckets(const PackPlan& plan, std::size_t latents);

/// Adds framepack.<i>.w/.b (role `full`) for every bucket.
void init_pack_params(ModelParams& params, const PackPlan& plan, std::size_t channels, std::size_t model_dim,
                      std::uint64_t seed);

struct PackedContext {
    std::optional<Var> tokens;  // empty when the context has no frames
    PositionGrid positions;
};

/// Packs context latents (oldest first) into tokens, oldest bucket first. `video_patch`
/// is the spatial unit for positions.
PackedContext pack(ParamBinder& bind, const LatentVideo& context, const PackPlan& plan, Triple video_patch);

/// Token count of pack() without evaluating it.
std::size_t packed_token_count(const Shape& context_shape, const PackPlan& plan);

}  // namespace wingen
