#include "wingen/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wingen/rng.hpp"

namespace wingen {

GradCheckReport finite_diff_check(const DifferentiableLoss& loss, const ParamMap& params,
                                  const GradCheckOptions& options) {
    if (options.epsilon < 1e-7 || options.epsilon > 1e-3)
        throw std::invalid_argument("finite_diff_check: epsilon must lie in [1e-7, 1e-3]");
    for (const auto& [name, arr] : params)
        if (arr.precision() != Precision::double_)
            throw std::invalid_argument("finite_diff_check requires double precision; '" + name + "' is single");

    const LossAndGrad base = loss(params, true);
    GradCheckReport report;
    Rng rng(options.seed);
    ParamMap probe = params;

    for (const auto& [name, g] : base.grads) {
        if (!options.only.empty() &&
            std::find(options.only.begin(), options.only.end(), name) == options.only.end())
            continue;
        auto pit = probe.find(name);
        if (pit == probe.end()) continue;
        const std::size_t n = g.size();
        const std::size_t k = std::min(options.samples_per_param, n);
        std::set<std::size_t> picked;
        while (picked.size() < k) picked.insert(static_cast<std::size_t>(rng.below(n)));
        ++report.groups_checked;
        for (std::size_t idx : picked) {
            double& slot = pit->second[idx];
            const double orig = slot;
            slot = orig + options.epsilon;
            const double up = loss(probe, false).loss;
            slot = orig - options.epsilon;
            const double down = loss(probe, false).loss;
            slot = orig;
            const double numeric = (up - down) / (2.0 * options.epsilon);
            const double analytic = g[idx];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
            const double rel = std::abs(analytic - numeric) / denom;
            report.entries.push_back({name, idx, analytic, numeric, rel});
            report.max_rel_error = std::max(report.max_rel_error, rel);
        }
    }
    report.passed = !report.entries.empty() && report.max_rel_error < options.tolerance;
    return report;
}

}  // namespace wingen
