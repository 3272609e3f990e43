#pragma once

#include <cassert>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace toxspan::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    [[nodiscard]] Tape& tape() const
    {
        assert(tape_ != nullptr);
        return *tape_;
    }
    [[nodiscard]] std::size_t id() const noexcept { return id_; }
    [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }

    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] const Shape& shape() const;
    [[nodiscard]] bool requires_grad() const;
    // Gradient from the last backward(); zeros if none reached this node.
    [[nodiscard]] Tensor grad() const;

private:
    Tape* tape_{nullptr};
    std::size_t id_{0};
};

// Records a computation in creation order, which is a topological order, so
// backward is a single reverse sweep. Nodes whose inputs need no gradient
// store no backward rule.
class Tape {
public:
    // Receives the node's output gradient; accumulates into inputs via accumulate().
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad = false)
    {
        nodes_.push_back(Node{std::move(value), nullptr, {}, requires_grad, {}, false});
        return {this, nodes_.size() - 1};
    }

    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Leaf that reads an external tensor in place; `value` must outlive the tape.
    Var external(const Tensor& value, bool requires_grad = false)
    {
        nodes_.push_back(Node{Tensor{}, &value, {}, requires_grad, {}, false});
        return {this, nodes_.size() - 1};
    }

    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward)
    {
        assert(value.all_finite() && "non-finite value recorded on tape");
        bool needs = false;
        for (const auto& in : inputs) {
            assert(&in.tape() == this && "mixing variables from different tapes");
            needs = needs || nodes_[in.id()].requires_grad;
        }
        nodes_.push_back(Node{std::move(value), nullptr, {}, needs, needs ? std::move(backward) : BackwardFn{}, false});
        return {this, nodes_.size() - 1};
    }

    Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward)
    {
        assert(value.all_finite() && "non-finite value recorded on tape");
        bool needs = false;
        for (const auto& in : inputs) needs = needs || nodes_[in.id()].requires_grad;
        nodes_.push_back(Node{std::move(value), nullptr, {}, needs, needs ? std::move(backward) : BackwardFn{}, false});
        return {this, nodes_.size() - 1};
    }

    [[nodiscard]] const Tensor& value(std::size_t id) const
    {
        const auto& n = nodes_[id];
        return n.external != nullptr ? *n.external : n.value;
    }
    [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

    // Adds g into the gradient slot of `v` if it takes gradients.
    void accumulate(const Var& v, const Tensor& g)
    {
        auto& n = nodes_[v.id()];
        if (!n.requires_grad) return;
        if (!n.has_grad) {
            n.grad = g;
            n.has_grad = true;
        } else {
            n.grad += g;
        }
    }

    // Gradient slot for in-place accumulation (allocated on first use).
    Tensor* grad_slot(const Var& v)
    {
        auto& n = nodes_[v.id()];
        if (!n.requires_grad) return nullptr;
        if (!n.has_grad) {
            n.grad = Tensor(value(v.id()).shape());
            n.has_grad = true;
        }
        return &n.grad;
    }

    [[nodiscard]] Tensor grad(std::size_t id) const
    {
        const auto& n = nodes_[id];
        if (n.has_grad) return n.grad;
        return Tensor(value(id).shape());
    }

    // Clears all gradients, seeds d(loss)/d(loss) = 1 and sweeps backwards.
    void backward(const Var& loss)
    {
        if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
        const auto& shape = value(loss.id()).shape();
        if (shape.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape.str());
        for (auto& n : nodes_) {
            n.has_grad = false;
            n.grad = Tensor{};
        }
        if (!nodes_[loss.id()].requires_grad) return;
        nodes_[loss.id()].grad = Tensor(shape, 1.0);
        nodes_[loss.id()].has_grad = true;
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.has_grad || !n.backward) continue;
            // Rules only touch lower ids, so the reference stays valid.
            n.backward(*this, n.grad);
        }
    }

private:
    struct Node {
        Tensor value;
        const Tensor* external;
        Tensor grad;
        bool requires_grad;
        BackwardFn backward;
        bool has_grad;
    };

    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape().value(id_); }
inline const Shape& Var::shape() const { return value().shape(); }
inline bool Var::requires_grad() const { return tape().requires_grad(id_); }
inline Tensor Var::grad() const { return tape().grad(id_); }

} // namespace toxspan::ad
