#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "core/tensor.hpp"

namespace omnivl {

// Reverse-mode tape. Nodes are created in topological order by the op
// functions; backward() walks the node list in reverse. Parameters are
// leaves owned outside the tape (see model/params.hpp); their grads are
// accumulated in place and survive tape destruction.
struct Node {
    Tensor val;
    Tensor grad;
    bool needs_grad = false;
    bool grad_ready = false;
    std::function<void()> backward;

    void ensure_grad() {
        if (!grad_ready) {
            grad = Tensor::zeros(val.shape);
            grad_ready = true;
        }
    }
};

using Var = Node*;

class Tape {
public:
    Node* make(Tensor val, bool needs_grad) {
        nodes_.push_back(std::make_unique<Node>());
        Node* n = nodes_.back().get();
        n->val = std::move(val);
        n->needs_grad = needs_grad;
        return n;
    }

    // Leaf wrapper for an externally owned tensor pair (parameter value and
    // grad buffers are used directly, no copies).
    void note_param(Node* leaf) { touched_.insert(leaf); }
    const std::unordered_set<Node*>& touched_params() const { return touched_; }

    void backward(Node* root) {
        root->ensure_grad();
        for (double& g : root->grad.data) g = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node* n = it->get();
            if (n->needs_grad && n->grad_ready && n->backward) n->backward();
        }
    }

    size_t size() const { return nodes_.size(); }

private:
    std::vector<std::unique_ptr<Node>> nodes_;
    std::unordered_set<Node*> touched_;
};

}  // namespace omnivl
