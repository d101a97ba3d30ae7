#include "wingen/framepack.hpp"

#include <algorithm>
#include <cmath>

#include "wingen/ops.hpp"
#include "wingen/rng.hpp"

namespace wingen {

std::vector<std::size_t> resolve_buckets(const PackPlan& plan, std::size_t latents) {
    std::vector<std::size_t> counts;
    std::size_t remaining = latents;
    for (const auto& b : plan.buckets) {
        if (remaining == 0) break;
        const std::size_t take = b.frames == 0 ? remaining : std::min(b.frames, remaining);
        counts.push_back(take);
        remaining -= take;
    }
    if (remaining != 0)
        throw ShapeError("pack plan covers " + std::to_string(latents - remaining) + " of " + std::to_string(latents) +
                         " context latents");
    return counts;
}

void init_pack_params(ModelParams& params, const PackPlan& plan, std::size_t channels, std::size_t model_dim,
                      std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = 0; i < plan.buckets.size(); ++i) {
        const std::size_t in = channels * plan.buckets[i].patch.volume();
        const std::string name = "framepack." + std::to_string(i);
        params.add(name + ".w", rng.normal_array({in, model_dim}, Precision::double_, 1.0 / std::sqrt(double(in))),
                   ParamRole::full);
        params.add(name + ".b", DenseArray({1, model_dim}, Precision::double_), ParamRole::full);
    }
}

namespace {

// bucket i covers latents [start, start + count) of the context, most recent bucket last
struct Span {
    std::size_t bucket, start, count;
};

std::vector<Span> spans(const PackPlan& plan, const Shape& s) {
    const std::size_t T = s[0];
    auto counts = resolve_buckets(plan, T);
    std::vector<Span> out;
    std::size_t end = T;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out.push_back({i, end - counts[i], counts[i]});
        end -= counts[i];
    }
    std::reverse(out.begin(), out.end());
    for (const auto& sp : out) {
        Shape sub = s;
        sub[0] = sp.count;
        check_patch_divisible(sub, plan.buckets[sp.bucket].patch, ("pack bucket " + std::to_string(sp.bucket)).c_str());
    }
    return out;
}

}  // namespace

std::size_t packed_token_count(const Shape& s, const PackPlan& plan) {
    if (s.empty() || s[0] == 0) return 0;
    std::size_t n = 0;
    for (const auto& sp : spans(plan, s)) {
        const Triple p = plan.buckets[sp.bucket].patch;
        n += (sp.count / p.t) * (s[2] / p.h) * (s[3] / p.w);
    }
    return n;
}

PackedContext pack(ParamBinder& bind, const LatentVideo& context, const PackPlan& plan, Triple video_patch) {
    PackedContext out;
    if (context.grid.rank() == 0 || context.time() == 0) return out;
    const std::size_t T = context.time();
    std::vector<Var> parts;
    for (const auto& sp : spans(plan, context.grid.shape())) {
        const Triple p = plan.buckets[sp.bucket].patch;
        DenseArray tok = patchify(context.slice(sp.start, sp.start + sp.count).grid, p);
        parts.push_back(bind.linear(bind.tape().constant(std::move(tok)), "framepack." + std::to_string(sp.bucket)));
        out.positions.append(grid_positions(sp.count, context.height(), context.width(), p, video_patch,
                                            static_cast<int>(sp.start) - static_cast<int>(T), TokenRole::context));
    }
    out.tokens = parts.size() == 1 ? parts.front() : ops::concat_rows(parts);
    return out;
}

}  // namespace wingen
