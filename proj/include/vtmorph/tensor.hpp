#pragma once

// Dense tensors with reverse-mode gradient tracking.
//
// A tensor is a shared handle to a graph node. Values are immutable once an
// op has produced them; the only sanctioned in-place writes are optimizer
// updates on leaf parameters (mutable_data) and gradient buffers.

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vtmorph {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& shape);
int64_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class GraphError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(const Node&)> backward_fn;
};

}  // namespace detail

template <typename T>
class BasicTensor {
public:
    using value_type = T;
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    BasicTensor() = default;
    explicit BasicTensor(NodePtr node) : node_(std::move(node)) {}

    static BasicTensor zeros(Shape shape, bool requires_grad = false);
    static BasicTensor full(Shape shape, T value, bool requires_grad = false);
    static BasicTensor from_vector(Shape shape, std::vector<T> values, bool requires_grad = false);
    static BasicTensor scalar(T value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int64_t dim() const { return static_cast<int64_t>(shape().size()); }
    // Negative axes count from the back.
    int64_t size(int64_t axis) const;
    int64_t numel() const;

    std::span<const T> data() const;
    // Writes bypass the graph; reserved for optimizer updates and loaders.
    std::span<T> mutable_data();
    T item() const;
    T at(std::initializer_list<int64_t> index) const;

    bool requires_grad() const;
    BasicTensor& set_requires_grad(bool on);
    bool is_leaf() const;
    bool has_grad() const;
    std::span<const T> grad() const;
    std::span<T> mutable_grad();
    void zero_grad();

    // Same values, no history.
    BasicTensor detach() const;
    const char* op_name() const;

    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Accumulates d(loss)/d(leaf) into every reachable leaf that requires grad.
// Leaf gradients add up across calls until zero_grad().
template <typename T>
void backward(const BasicTensor<T>& loss);

namespace testing_hooks {
// Scales the gradient flowing out of every node whose op matches `op` by
// 1.5; used to prove the gradient checker catches a broken backward.
void corrupt_gradient(const std::string& op);
void clear_corruption();
}  // namespace testing_hooks

namespace detail {

template <typename T>
std::span<T> grad_buffer(Node<T>& node);

template <typename T>
void check_finite(const BasicTensor<T>& t, const char* op);

template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                           std::vector<std::shared_ptr<Node<T>>> parents,
                           std::function<void(const Node<T>&)> backward_fn);

}  // namespace detail

}  // namespace vtmorph
