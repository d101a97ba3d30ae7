#pragma once

#include <map>
#include <string>
#include <vector>

#include "wingen/dense_array.hpp"
#include "wingen/grad_check.hpp"
#include "wingen/tape.hpp"

namespace wingen {

/// Optimizer routing of a named base weight.
enum class ParamRole {
    frozen,       // never updated
    full,         // updated directly at the full-parameter learning rate
    lora_target,  // frozen; a low-rank adapter on it is trained instead
};

const char* to_string(ParamRole r);

/// Named base weights plus the freeze/routing mask. Names are unique.
class ModelParams {
public:
    void add(const std::string& name, DenseArray value, ParamRole role);
    bool contains(const std::string& name) const { return values_.count(name) > 0; }
    const DenseArray& get(const std::string& name) const;
    DenseArray& mutable_get(const std::string& name);
    void set(const std::string& name, DenseArray value);
    ParamRole role(const std::string& name) const;
    void set_role(const std::string& name, ParamRole role);

    const std::map<std::string, DenseArray>& values() const { return values_; }
    std::vector<std::string> names() const;
    std::vector<std::string> names_with_role(ParamRole role) const;
    std::size_t parameter_count() const;

    ModelParams cast(Precision p) const;

private:
    std::map<std::string, DenseArray> values_;
    std::map<std::string, ParamRole> roles_;
};

/// Low-rank residual on a target weight W [n x m]: W' = W + (alpha / rank) * A B^T,
/// A [n x rank], B [m x rank].
struct LoraPair {
    DenseArray a;
    DenseArray b;
};

class LoraAdapter {
public:
    LoraAdapter() = default;
    LoraAdapter(std::size_t rank, double alpha) : rank_(rank), alpha_(alpha) {}

    std::size_t rank() const { return rank_; }
    double alpha() const { return alpha_; }
    double scale() const { return alpha_ / static_cast<double>(rank_); }

    void add(const std::string& target, LoraPair pair);
    bool has(const std::string& target) const { return pairs_.count(target) > 0; }
    const LoraPair& pair(const std::string& target) const;
    LoraPair& mutable_pair(const std::string& target);
    const std::map<std::string, LoraPair>& pairs() const { return pairs_; }
    bool empty() const { return pairs_.empty(); }

    LoraAdapter cast(Precision p) const;

    static std::string a_name(const std::string& target) { return "lora." + target + ".a"; }
    static std::string b_name(const std::string& target) { return "lora." + target + ".b"; }

private:
    std::size_t rank_ = 1;
    double alpha_ = 1.0;
    std::map<std::string, LoraPair> pairs_;
};

/// Returns the materialized weights W + scale * A B^T for every adapter target; other
/// entries are copied unchanged. The input params are not modified.
ModelParams apply_lora(const ModelParams& params, const LoraAdapter& adapter);

/// Which tensors become differentiable leaves when bound to a tape.
enum class GradScope {
    none,     // inference: everything constant
    routed,   // `full` weights and adapter factors
    everything,
};

/// Binds ModelParams (and an optional adapter) onto a tape, one leaf per name.
class ParamBinder {
public:
    ParamBinder(Tape& tape, const ModelParams& params, const LoraAdapter* adapter, GradScope scope);

    Tape& tape() { return tape_; }
    Var get(const std::string& name);
    bool has(const std::string& name) const { return params_.contains(name); }
    /// x W + b with W = `prefix.w`, optional b = `prefix.b`, and the LoRA residual if the
    /// adapter targets `prefix.w`.
    Var linear(Var x, const std::string& prefix);

    /// Names (base and adapter) that are differentiable under this scope, with shapes.
    std::map<std::string, Shape> trainable_shapes() const;

private:
    bool is_leaf(const std::string& name) const;

    Tape& tape_;
    const ModelParams& params_;
    const LoraAdapter* adapter_;
    GradScope scope_;
    std::map<std::string, Var> cache_;
};

struct NamedGradients {
    ParamMap grads;
    // names requested but never reached by the loss
    std::vector<std::string> diagnostics;
};

/// Reverse sweep from `loss`, collecting gradients for every requested name. Names absent
/// from the tape get a zero gradient and a diagnostics entry.
NamedGradients grad(Tape& tape, Var loss, const std::map<std::string, Shape>& requested);

/// Flattens base params and adapter factors into one name -> array map.
ParamMap flatten(const ModelParams& params, const LoraAdapter* adapter);
/// Writes values from a flat map back into params/adapter (names must exist).
void unflatten(const ParamMap& flat, ModelParams& params, LoraAdapter* adapter);

}  // namespace wingen
