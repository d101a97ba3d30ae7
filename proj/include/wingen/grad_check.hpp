#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wingen/dense_array.hpp"

namespace wingen {

using ParamMap = std::map<std::string, DenseArray>;

struct LossAndGrad {
    double loss = 0.0;
    ParamMap grads;
};

/// Evaluates the loss at `params`; fills grads only when `want_grad` is set.
using DifferentiableLoss = std::function<LossAndGrad(const ParamMap& params, bool want_grad)>;

struct GradCheckOptions {
    double epsilon = 1e-6;
    double tolerance = 1e-6;
    std::size_t samples_per_param = 3;
    std::uint64_t seed = 0;
    // relative error denominator is max(|analytic|, |numeric|, abs_floor)
    double abs_floor = 1e-6;
    // restrict to these names (empty = every name with an analytic gradient)
    std::vector<std::string> only;
};

struct GradCheckEntry {
    std::string name;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    bool passed = false;
    std::size_t groups_checked = 0;
};

/// Central-difference check of analytic gradients. Refuses single-precision inputs.
GradCheckReport finite_diff_check(const DifferentiableLoss& loss, const ParamMap& params,
                                  const GradCheckOptions& options);

}  // namespace wingen
