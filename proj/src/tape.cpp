#include "wingen/tape.hpp"

namespace wingen {

const DenseArray& Var::value() const { return tape->value(id); }

Var Tape::constant(DenseArray a) {
    if (a.precision() != precision_) a = a.cast(precision_);
    nodes_.push_back(Node{std::move(a), false, nullptr, {}});
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(const std::string& name, const DenseArray& a) {
    DenseArray v = a.precision() == precision_ ? a : a.cast(precision_);
    nodes_.push_back(Node{std::move(v), record_, nullptr, {}});
    const int id = static_cast<int>(nodes_.size() - 1);
    params_[name].push_back(id);
    return Var{this, id};
}

Var Tape::push(DenseArray value, std::initializer_list<Var> parents, Backward backward) {
    bool needs = false;
    if (record_)
        for (const auto& p : parents) needs = needs || nodes_[p.id].needs_grad;
    if (value.precision() != precision_) value = value.cast(precision_);
    nodes_.push_back(Node{std::move(value), needs, needs ? std::move(backward) : nullptr, {}});
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::push(DenseArray value, const std::vector<Var>& parents, Backward backward) {
    bool needs = false;
    if (record_)
        for (const auto& p : parents) needs = needs || nodes_[p.id].needs_grad;
    if (value.precision() != precision_) value = value.cast(precision_);
    nodes_.push_back(Node{std::move(value), needs, needs ? std::move(backward) : nullptr, {}});
    return Var{this, static_cast<int>(nodes_.size() - 1)};
}

std::vector<double>& Tape::grad(int id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("loss belongs to another tape");
    if (nodes_[loss.id].value.size() != 1)
        throw ShapeError("backward needs a scalar loss, got " + shape_str(nodes_[loss.id].value.shape()));
    for (auto& n : nodes_) n.grad.clear();
    if (!nodes_[loss.id].needs_grad) return;
    grad(loss.id)[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        auto& n = nodes_[i];
        if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
}

std::optional<DenseArray> Tape::param_grad(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) return std::nullopt;
    const auto& first = nodes_[it->second.front()].value;
    std::vector<double> g(first.size(), 0.0);
    for (int id : it->second) {
        if (nodes_[id].grad.empty()) continue;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += nodes_[id].grad[i];
    }
    return DenseArray(first.shape(), std::move(g), precision_);
}

}  // namespace wingen
