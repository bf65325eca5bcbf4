#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fringeforge/tensor.hpp"

namespace fringeforge {

/// Trainable tensor: value plus the gradient of the most recent backward pass.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor init) : name(std::move(n)), value(std::move(init)) {
        grad = Tensor::zeros(value.shape());
    }

    void zero_grad() { grad = Tensor::zeros(value.shape()); }
};

/// Reverse-mode computation tape. Nodes are appended in forward order, so the
/// list itself is a topological order; backward() sweeps it once in reverse.
/// Single-threaded by contract.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&)>;

    /// Register a leaf for a parameter. Watching the same parameter twice
    /// returns the original leaf so fan-out accumulates on one node.
    Tensor watch(Parameter& p) {
        auto it = watched_.find(&p);
        if (it != watched_.end()) {
            Tensor t = p.value.detached();
            t.set_tracking(this, it->second);
            return t;
        }
        int id = add_node(p.value.shape(), nullptr, &p);
        watched_.emplace(&p, id);
        Tensor t = p.value.detached();
        t.set_tracking(this, id);
        return t;
    }

    /// Register a plain leaf (no parameter binding); used by gradient checks.
    Tensor leaf(const Tensor& value) {
        int id = add_node(value.shape(), nullptr, nullptr);
        Tensor t = value.detached();
        t.set_tracking(this, id);
        return t;
    }

    /// Append an interior node. The closure accumulates into input gradients
    /// via grad_buffer(); it runs only if this node received a gradient.
    int add_node(Shape out_shape, BackwardFn fn, Parameter* param = nullptr) {
        nodes_.push_back(Node{out_shape, std::move(fn), Tensor{}, param});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::size_t size() const { return nodes_.size(); }

    /// Gradient accumulator for a node, allocated as zeros on first use.
    Tensor& grad_buffer(int node) {
        Node& n = nodes_.at(static_cast<std::size_t>(node));
        if (!n.grad.defined()) n.grad = Tensor::zeros(n.shape);
        return n.grad;
    }

    bool has_grad(int node) const { return nodes_.at(static_cast<std::size_t>(node)).grad.defined(); }

    /// Gradient of a tracked tensor after backward(); zeros if the node was
    /// never reached.
    Tensor grad(const Tensor& t) const {
        if (t.tape() != this || t.node() < 0) throw std::invalid_argument("tensor is not tracked on this tape");
        const Node& n = nodes_.at(static_cast<std::size_t>(t.node()));
        return n.grad.defined() ? n.grad : Tensor::zeros(n.shape);
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate additively
    /// across fan-out; watched parameters receive their gradient tensors.
    void backward(const Tensor& loss) {
        if (loss.tape() != this || loss.node() < 0)
            throw std::invalid_argument("backward: loss is not tracked on this tape");
        if (!loss.is_scalar())
            throw std::invalid_argument("backward: loss must be a [1,1,1,1] scalar, got " + loss.shape().str());

        grad_buffer(loss.node()).mut()[0] = 1.0;
        for (int id = loss.node(); id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.backward && n.grad.defined()) n.backward(*this);
        }
        for (auto& [param, id] : watched_) {
            const Node& n = nodes_[static_cast<std::size_t>(id)];
            param->grad = n.grad.defined() ? n.grad.clone() : Tensor::zeros(n.shape);
        }
    }

private:
    struct Node {
        Shape shape;
        BackwardFn backward;  // null for leaves
        Tensor grad;
        Parameter* param = nullptr;
    };

    std::vector<Node> nodes_;
    std::unordered_map<Parameter*, int> watched_;
};

namespace detail {

/// Accumulate src scaled by factor into a node's gradient buffer.
inline void axpy_into(Tape& tape, int node, const Tensor& src, double factor = 1.0) {
    if (node < 0) return;
    Tensor& g = tape.grad_buffer(node);
    double* gd = g.mut();
    const double* sd = src.data();
    const std::int64_t n = src.numel();
    for (std::int64_t i = 0; i < n; ++i) gd[i] += factor * sd[i];
}

}  // namespace detail

/// Central finite-difference check of a scalar-valued function against the
/// tape gradients of its inputs. Returns the worst mixed relative/absolute
/// error over all input elements.
inline double grad_check(const std::function<Tensor(Tape&, const std::vector<Tensor>&)>& scalar_fn,
                         const std::vector<Tensor>& inputs, double step = 1e-5) {
    if (step < 1e-6 || step > 1e-4) throw std::invalid_argument("grad_check: step must lie in [1e-6, 1e-4]");

    Tape tape;
    std::vector<Tensor> tracked;
    tracked.reserve(inputs.size());
    for (const Tensor& in : inputs) tracked.push_back(tape.leaf(in));
    Tensor loss = scalar_fn(tape, tracked);
    if (!loss.is_scalar()) throw std::invalid_argument("grad_check: function must produce a scalar");
    tape.backward(loss);

    std::vector<Tensor> analytic;
    analytic.reserve(inputs.size());
    for (const Tensor& t : tracked) analytic.push_back(tape.grad(t));

    auto eval_at = [&](const std::vector<Tensor>& probe) {
        Tape fresh;
        std::vector<Tensor> leaves;
        leaves.reserve(probe.size());
        for (const Tensor& p : probe) leaves.push_back(fresh.leaf(p));
        return scalar_fn(fresh, leaves).item();
    };

    double worst = 0.0;
    std::vector<Tensor> probe;
    probe.reserve(inputs.size());
    for (const Tensor& in : inputs) probe.push_back(in.clone());

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::int64_t n = inputs[i].numel();
        for (std::int64_t e = 0; e < n; ++e) {
            double* cell = probe[i].mut() + e;
            const double saved = *cell;
            *cell = saved + step;
            const double f_plus = eval_at(probe);
            *cell = saved - step;
            const double f_minus = eval_at(probe);
            *cell = saved;

            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double exact = analytic[i].data()[e];
            const double denom = std::max({1.0, std::abs(numeric), std::abs(exact)});
            worst = std::max(worst, std::abs(numeric - exact) / denom);
        }
    }
    return worst;
}

}  // namespace fringeforge
