#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wingen/dense_array.hpp"

namespace wingen {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const DenseArray& value() const;
    const Shape& shape() const { return value().shape(); }
    bool valid() const { return tape != nullptr; }
};

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so a reverse sweep
/// is a valid topological order. A tape constructed with record=false evaluates values
/// only and keeps no backward closures (inference mode).
class Tape {
public:
    using Backward = std::function<void(Tape&, int self)>;

    explicit Tape(Precision p = Precision::single, bool record = true) : precision_(p), record_(record) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Precision precision() const { return precision_; }
    bool recording() const { return record_; }

    Var constant(DenseArray a);
    /// Differentiable leaf. Registering the same name twice accumulates into one gradient.
    Var param(const std::string& name, const DenseArray& a);

    const DenseArray& value(int id) const { return nodes_[id].value; }
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    std::size_t node_count() const { return nodes_.size(); }

    /// Appends an op result. `parents` decide whether the node carries a gradient.
    Var push(DenseArray value, std::initializer_list<Var> parents, Backward backward);
    Var push(DenseArray value, const std::vector<Var>& parents, Backward backward);

    /// Gradient buffer of a node (zero-filled on first access).
    std::vector<double>& grad(int id);
    bool has_grad(int id) const { return !nodes_[id].grad.empty(); }

    /// Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. Loss must be a 1-element node.
    void backward(Var loss);

    bool has_param(const std::string& name) const { return params_.count(name) > 0; }
    /// Accumulated gradient of a registered parameter after backward(); nullopt if the
    /// name was never registered.
    std::optional<DenseArray> param_grad(const std::string& name);

private:
    struct Node {
        DenseArray value;
        bool needs_grad = false;
        Backward backward;
        std::vector<double> grad;
    };

    Precision precision_;
    bool record_;
    std::vector<Node> nodes_;
    std::map<std::string, std::vector<int>> params_;
};

}  // namespace wingen
