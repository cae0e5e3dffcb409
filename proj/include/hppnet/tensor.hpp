#ifndef HPPNET_TENSOR_HPP
#define HPPNET_TENSOR_HPP

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace hppnet {

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<int64_t>;

inline int64_t shape_size(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// One node of the computation graph. Values are written once at
// construction; the grad buffer is filled during backward().
template <typename S>
struct Node {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    int64_t size() const { return static_cast<int64_t>(value.size()); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

// Dense n-dimensional tensor, a shared handle to an immutable graph node.
// Every op allocates a fresh output buffer; inputs are never mutated.
template <typename S>
class Tensor {
public:
    using Scalar = S;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return filled(std::move(shape), S(0), requires_grad);
    }

    static Tensor filled(Shape shape, S v, bool requires_grad = false) {
        auto n = std::make_shared<Node<S>>();
        n->value.assign(shape_size(shape), v);
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor from(Shape shape, std::vector<S> data, bool requires_grad = false) {
        if (shape_size(shape) != static_cast<int64_t>(data.size()))
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
        auto n = std::make_shared<Node<S>>();
        n->shape = std::move(shape);
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor scalar(S v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t dim(size_t i) const { return node_->shape.at(i); }
    size_t rank() const { return node_->shape.size(); }
    int64_t size() const { return node_->size(); }

    const S* data() const { return node_->value.data(); }
    S* mutable_data() { return node_->value.data(); }
    const std::vector<S>& values() const { return node_->value; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    const std::vector<S>& grad() const { return node_->grad; }
    void zero_grad() { node_->grad.assign(node_->value.size(), S(0)); }
    void drop_grad() { node_->grad.clear(); }

    S item() const {
        if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    // Same value, cut loose from the graph. The buffer is copied so the
    // detached tensor keeps value semantics.
    Tensor detach() const {
        auto n = std::make_shared<Node<S>>();
        n->shape = node_->shape;
        n->value = node_->value;
        n->requires_grad = false;
        return Tensor(std::move(n));
    }

    std::shared_ptr<Node<S>> node() const { return node_; }

    explicit Tensor(std::shared_ptr<Node<S>> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<Node<S>> node_;
};

namespace detail {

template <typename S>
std::shared_ptr<Node<S>> make_result(Shape shape, std::vector<Tensor<S>> inputs) {
    auto n = std::make_shared<Node<S>>();
    n->value.assign(shape_size(shape), S(0));
    n->shape = std::move(shape);
    for (auto& t : inputs) {
        if (t.node()->requires_grad) n->requires_grad = true;
        n->parents.push_back(t.node());
    }
    return n;
}

template <typename S>
void topo_sort(Node<S>* root, std::vector<Node<S>*>& order) {
    // Iterative DFS; graphs from long LSTM rollouts are too deep for recursion.
    std::unordered_set<Node<S>*> visited;
    std::vector<std::pair<Node<S>*, size_t>> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        bool descended = false;
        while (next < node->parents.size()) {
            Node<S>* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }
}

} // namespace detail

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable node that requires grad; parameter grads persist across calls
// until zero_grad().
template <typename S>
void backward(const Tensor<S>& loss) {
    if (loss.size() != 1) throw ContractError("backward() requires a scalar loss, got " + shape_str(loss.shape()));
    Node<S>* root = loss.node().get();
    if (!root->requires_grad) return;

    std::vector<Node<S>*> order;
    detail::topo_sort(root, order);

    // Interior nodes get a fresh pass; only leaves (parameters) accumulate
    // across repeated backward() calls.
    for (Node<S>* n : order)
        if (n->backward_fn && !n->grad.empty()) std::fill(n->grad.begin(), n->grad.end(), S(0));

    root->ensure_grad();
    root->grad[0] += S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<S>* n = *it;
        if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
    }
}

} // namespace hppnet

#endif
