#include "vtmorph/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace vtmorph {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

namespace {

thread_local bool t_grad_enabled = true;

std::string& corrupted_op() {
    static std::string op;
    return op;
}

void validate_shape(const Shape& shape) {
    for (auto e : shape) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
}

template <typename T>
void require_all_finite(std::span<const T> values, const char* what) {
    for (auto v : values) {
        if (!std::isfinite(v)) throw NonFiniteError(std::string(what) + ": non-finite value");
    }
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

namespace testing_hooks {
void corrupt_gradient(const std::string& op) { corrupted_op() = op; }
void clear_corruption() { corrupted_op().clear(); }
}  // namespace testing_hooks

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
    validate_shape(shape);
    auto node = std::make_shared<detail::Node<T>>();
    node->data.assign(static_cast<size_t>(shape_numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    require_all_finite<T>(node->data, "tensor construction");
    return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_vector(Shape shape, std::vector<T> values, bool requires_grad) {
    validate_shape(shape);
    if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
        throw ShapeError("shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
    }
    require_all_finite<T>(values, "tensor construction");
    auto node = std::make_shared<detail::Node<T>>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return BasicTensor(std::move(node));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
    return from_vector({1}, {value}, requires_grad);
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
    if (!node_) throw GraphError("use of undefined tensor");
    return node_->shape;
}

template <typename T>
int64_t BasicTensor<T>::size(int64_t axis) const {
    const auto& s = shape();
    const auto rank = static_cast<int64_t>(s.size());
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    }
    return s[static_cast<size_t>(axis)];
}

template <typename T>
int64_t BasicTensor<T>::numel() const {
    return static_cast<int64_t>(data().size());
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
    if (!node_) throw GraphError("use of undefined tensor");
    return node_->data;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
    if (!node_) throw GraphError("use of undefined tensor");
    return node_->data;
}

template <typename T>
T BasicTensor<T>::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

template <typename T>
T BasicTensor<T>::at(std::initializer_list<int64_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) throw ShapeError("index rank mismatch for " + shape_str(s));
    int64_t flat = 0;
    size_t axis = 0;
    for (auto i : index) {
        if (i < 0 || i >= s[axis]) throw ShapeError("index out of range for " + shape_str(s));
        flat = flat * s[axis] + i;
        ++axis;
    }
    return node_->data[static_cast<size_t>(flat)];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
    return node_ && node_->requires_grad;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
    if (!node_) throw GraphError("use of undefined tensor");
    if (node_->backward_fn) throw GraphError("requires_grad can only be set on leaf tensors");
    node_->requires_grad = on;
    return *this;
}

template <typename T>
bool BasicTensor<T>::is_leaf() const {
    return node_ && !node_->backward_fn;
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
    return node_ && !node_->grad.empty();
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
    if (!has_grad()) throw GraphError("tensor has no gradient");
    return node_->grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
    if (!node_) throw GraphError("use of undefined tensor");
    return detail::grad_buffer(*node_);
}

template <typename T>
void BasicTensor<T>::zero_grad() {
    if (node_ && !node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
    auto node = std::make_shared<detail::Node<T>>();
    node->shape = shape();
    node->data = node_->data;
    return BasicTensor(std::move(node));
}

template <typename T>
const char* BasicTensor<T>::op_name() const {
    return node_ ? node_->op : "undefined";
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
    if (!loss.defined()) throw GraphError("backward on undefined tensor");
    if (loss.numel() != 1) throw GraphError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad()) throw GraphError("backward on a detached loss (no graph recorded)");

    using NodeT = detail::Node<T>;
    std::vector<NodeT*> order;
    std::unordered_set<NodeT*> visited;
    std::vector<std::pair<NodeT*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodeT* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* node : order) {
        if (node->backward_fn) node->grad.assign(node->data.size(), T(0));
    }
    detail::grad_buffer(*loss.node())[0] += T(1);

    const std::string& corrupt = corrupted_op();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT* node = *it;
        if (!node->backward_fn) continue;
        if (!corrupt.empty() && corrupt == node->op) {
            for (auto& g : node->grad) g *= T(1.5);
        }
        node->backward_fn(*node);
    }
    for (auto* node : order) {
        if (node->backward_fn) {
            node->grad.clear();
            node->grad.shrink_to_fit();
        }
    }
}

namespace detail {

template <typename T>
std::span<T> grad_buffer(Node<T>& node) {
    if (node.grad.empty()) node.grad.assign(node.data.size(), T(0));
    return node.grad;
}

template <typename T>
void check_finite(const BasicTensor<T>& t, const char* op) {
    for (auto v : t.data()) {
        if (!std::isfinite(v)) {
            throw NonFiniteError(std::string(op) + ": non-finite input of shape " + shape_str(t.shape()));
        }
    }
}

template <typename T>
BasicTensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                           std::vector<std::shared_ptr<Node<T>>> parents,
                           std::function<void(const Node<T>&)> backward_fn) {
    auto node = std::make_shared<Node<T>>();
    node->op = op;
    node->shape = std::move(shape);
    node->data = std::move(data);
    for (auto v : node->data) {
        if (!std::isfinite(v)) throw NonFiniteError(std::string(op) + ": produced a non-finite value");
    }
    bool track = false;
    if (grad_enabled()) {
        for (const auto& p : parents) track = track || p->requires_grad;
    }
    if (track) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward_fn = std::move(backward_fn);
    }
    return BasicTensor<T>(std::move(node));
}

}  // namespace detail

#define VTMORPH_INSTANTIATE(T)                                                                       \
    template class BasicTensor<T>;                                                                   \
    template void backward<T>(const BasicTensor<T>&);                                                \
    template std::span<T> detail::grad_buffer<T>(detail::Node<T>&);                                  \
    template void detail::check_finite<T>(const BasicTensor<T>&, const char*);                       \
    template BasicTensor<T> detail::make_result<T>(const char*, Shape, std::vector<T>,               \
                                                   std::vector<std::shared_ptr<detail::Node<T>>>,    \
                                                   std::function<void(const detail::Node<T>&)>);

VTMORPH_INSTANTIATE(float)
VTMORPH_INSTANTIATE(double)

#undef VTMORPH_INSTANTIATE

}  // namespace vtmorph
