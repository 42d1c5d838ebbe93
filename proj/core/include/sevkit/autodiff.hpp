#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sevkit/tensor.hpp"

namespace sevkit {

/// Reverse-mode tape. A forward pass records one node per op in evaluation
/// order; backward() seeds the output gradient and replays the recorded
/// closures in reverse. Each closure pulls the node's accumulated gradient
/// and scatters it into parent nodes and captured parameter buffers.
///
/// One tape serves one forward evaluation and is single-writer.
template <typename T>
class TapeT {
public:
    using NodeId = std::size_t;

    NodeId leaf(TensorT<T> value) { return push(std::move(value), nullptr); }

    NodeId push(TensorT<T> value, std::function<void(TapeT&, NodeId)> backprop) {
        nodes_.push_back(Node{std::move(value), TensorT<T>{}, std::move(backprop), false});
        return nodes_.size() - 1;
    }

    const TensorT<T>& value(NodeId id) const { return nodes_.at(id).value; }

    /// Gradient buffer for a node, allocated (zeros) on first touch.
    TensorT<T>& grad(NodeId id) {
        Node& n = nodes_.at(id);
        if (!n.grad_live) {
            n.grad = TensorT<T>::zeros_like(n.value);
            n.grad_live = true;
        }
        return n.grad;
    }

    bool has_grad(NodeId id) const { return nodes_.at(id).grad_live; }

    /// Reverse-accumulate from `output`, seeded with `output_grad`.
    void backward(NodeId output, const TensorT<T>& output_grad) {
        if (output >= nodes_.size()) {
            throw std::invalid_argument("tape backward: node id out of range");
        }
        require_same_shape(nodes_[output].value, output_grad, "tape backward seed");
        grad(output) += output_grad;
        for (std::size_t i = output + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.grad_live && n.backprop) n.backprop(*this, i);
        }
    }

    std::size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

private:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad;
        std::function<void(TapeT&, NodeId)> backprop;
        bool grad_live;
    };
    std::vector<Node> nodes_;
};

using Tape = TapeT<float>;
using TapeD = TapeT<double>;

/// value(a) + value(b), gradient fans out to both parents.
template <typename T>
typename TapeT<T>::NodeId tape_add(TapeT<T>& tape, typename TapeT<T>::NodeId a,
                                   typename TapeT<T>::NodeId b) {
    TensorT<T> v = tape.value(a) + tape.value(b);
    return tape.push(std::move(v), [a, b](TapeT<T>& t, typename TapeT<T>::NodeId self) {
        t.grad(a) += t.grad(self);
        t.grad(b) += t.grad(self);
    });
}

}  // namespace sevkit
