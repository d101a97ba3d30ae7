#include "wingen/params.hpp"

#include "wingen/ops.hpp"

namespace wingen {

const char* to_string(ParamRole r) {
    switch (r) {
    case ParamRole::frozen: return "frozen";
    case ParamRole::full: return "full";
    case ParamRole::lora_target: return "lora_target";
    }
    return "?";
}

void ModelParams::add(const std::string& name, DenseArray value, ParamRole role) {
    if (values_.count(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
    values_.emplace(name, std::move(value));
    roles_.emplace(name, role);
}

const DenseArray& ModelParams::get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

DenseArray& ModelParams::mutable_get(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

void ModelParams::set(const std::string& name, DenseArray value) {
    auto& slot = mutable_get(name);
    if (slot.shape() != value.shape())
        throw ShapeError("parameter '" + name + "' is " + shape_str(slot.shape()) + ", got " +
                         shape_str(value.shape()));
    slot = std::move(value);
}

ParamRole ModelParams::role(const std::string& name) const {
    auto it = roles_.find(name);
    if (it == roles_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    return it->second;
}

void ModelParams::set_role(const std::string& name, ParamRole role) {
    auto it = roles_.find(name);
    if (it == roles_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
    it->second = role;
}

std::vector<std::string> ModelParams::names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
}

std::vector<std::string> ModelParams::names_with_role(ParamRole role) const {
    std::vector<std::string> out;
    for (const auto& [k, r] : roles_)
        if (r == role) out.push_back(k);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : values_) n += v.size();
    return n;
}

ModelParams ModelParams::cast(Precision p) const {
    ModelParams out = *this;
    for (auto& [k, v] : out.values_) v = v.cast(p);
    return out;
}

void LoraAdapter::add(const std::string& target, LoraPair pair) {
    if (pair.a.rank() != 2 || pair.b.rank() != 2 || pair.a.dim(1) != rank_ || pair.b.dim(1) != rank_)
        throw ShapeError("LoRA factors for '" + target + "' must be [n x " + std::to_string(rank_) + "] and [m x " +
                         std::to_string(rank_) + "], got " + shape_str(pair.a.shape()) + " and " +
                         shape_str(pair.b.shape()));
    pairs_[target] = std::move(pair);
}

const LoraPair& LoraAdapter::pair(const std::string& target) const {
    auto it = pairs_.find(target);
    if (it == pairs_.end()) throw std::out_of_range("no LoRA pair for '" + target + "'");
    return it->second;
}

LoraPair& LoraAdapter::mutable_pair(const std::string& target) {
    auto it = pairs_.find(target);
    if (it == pairs_.end()) throw std::out_of_range("no LoRA pair for '" + target + "'");
    return it->second;
}

LoraAdapter LoraAdapter::cast(Precision p) const {
    LoraAdapter out = *this;
    for (auto& [k, pr] : out.pairs_) {
        pr.a = pr.a.cast(p);
        pr.b = pr.b.cast(p);
    }
    return out;
}

ModelParams apply_lora(const ModelParams& params, const LoraAdapter& adapter) {
    ModelParams out = params;
    for (const auto& [target, pr] : adapter.pairs()) {
        if (!params.contains(target)) throw std::invalid_argument("LoRA target '" + target + "' not in params");
        const auto& w = params.get(target);
        if (w.rank() != 2 || w.dim(0) != pr.a.dim(0) || w.dim(1) != pr.b.dim(0))
            throw ShapeError("LoRA factors " + shape_str(pr.a.shape()) + "/" + shape_str(pr.b.shape()) +
                             " do not match weight '" + target + "' " + shape_str(w.shape()));
        DenseArray delta = matmul(pr.a, transpose(pr.b));
        out.set(target, add(w, scaled(delta, adapter.scale())).cast(w.precision()));
    }
    return out;
}

ParamBinder::ParamBinder(Tape& tape, const ModelParams& params, const LoraAdapter* adapter, GradScope scope)
    : tape_(tape), params_(params), adapter_(adapter), scope_(scope) {}

bool ParamBinder::is_leaf(const std::string& name) const {
    switch (scope_) {
    case GradScope::none: return false;
    case GradScope::everything: return true;
    case GradScope::routed:
        if (name.rfind("lora.", 0) == 0) return true;
        return params_.role(name) == ParamRole::full;
    }
    return false;
}

Var ParamBinder::get(const std::string& name) {
    if (auto it = cache_.find(name); it != cache_.end()) return it->second;
    const DenseArray* value = nullptr;
    if (name.rfind("lora.", 0) == 0) {
        // lora.<target>.a / .b
        const std::string target = name.substr(5, name.size() - 7);
        const auto& pr = adapter_->pair(target);
        value = name.back() == 'a' ? &pr.a : &pr.b;
    } else {
        value = &params_.get(name);
    }
    Var v = is_leaf(name) ? tape_.param(name, *value) : tape_.constant(*value);
    cache_.emplace(name, v);
    return v;
}

Var ParamBinder::linear(Var x, const std::string& prefix) {
    const std::string wname = prefix + ".w";
    Var y = ops::matmul(x, get(wname));
    if (adapter_ && adapter_->has(wname)) {
        Var xa = ops::matmul(x, get(LoraAdapter::a_name(wname)));
        Var delta = ops::matmul_nt(xa, get(LoraAdapter::b_name(wname)));
        y = ops::add(y, ops::scale(delta, adapter_->scale()));
    }
    const std::string bname = prefix + ".b";
    if (params_.contains(bname)) y = ops::add_row(y, get(bname));
    return y;
}

std::map<std::string, Shape> ParamBinder::trainable_shapes() const {
    std::map<std::string, Shape> out;
    if (scope_ == GradScope::none) return out;
    for (const auto& [name, v] : params_.values())
        if (is_leaf(name)) out.emplace(name, v.shape());
    if (adapter_)
        for (const auto& [target, pr] : adapter_->pairs()) {
            out.emplace(LoraAdapter::a_name(target), pr.a.shape());
            out.emplace(LoraAdapter::b_name(target), pr.b.shape());
        }
    return out;
}

NamedGradients grad(Tape& tape, Var loss, const std::map<std::string, Shape>& requested) {
    tape.backward(loss);
    NamedGradients out;
    for (const auto& [name, shape] : requested) {
        if (auto g = tape.param_grad(name)) {
            out.grads.emplace(name, std::move(*g));
        } else {
            out.grads.emplace(name, DenseArray(shape, tape.precision()));
            out.diagnostics.push_back(name);
        }
    }
    return out;
}

ParamMap flatten(const ModelParams& params, const LoraAdapter* adapter) {
    ParamMap out(params.values().begin(), params.values().end());
    if (adapter)
        for (const auto& [target, pr] : adapter->pairs()) {
            out.emplace(LoraAdapter::a_name(target), pr.a);
            out.emplace(LoraAdapter::b_name(target), pr.b);
        }
    return out;
}

void unflatten(const ParamMap& flat, ModelParams& params, LoraAdapter* adapter) {
    for (const auto& [name, v] : flat) {
        if (name.rfind("lora.", 0) == 0) {
            if (!adapter) throw std::invalid_argument("adapter tensor '" + name + "' without an adapter");
            const std::string target = name.substr(5, name.size() - 7);
            auto& pr = adapter->mutable_pair(target);
            (name.back() == 'a' ? pr.a : pr.b) = v;
        } else {
            params.set(name, v);
        }
    }
}

}  // namespace wingen
