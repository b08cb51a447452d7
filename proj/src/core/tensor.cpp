#include "quite/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "quite/errors.hpp"

namespace quite {

namespace {

thread_local bool g_grad_enabled = true;
thread_local std::string g_fault_op;
thread_local double g_fault_factor = 1.0;

// Tape buffers are allocated and freed per op; keep them out of mmap.
#if defined(__GLIBC__)
const int g_malloc_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return 0;
}();
#endif

void require_finite(const std::vector<double>& data, const char* op) {
    // x * 0 is NaN exactly when x is NaN or infinite.
    double probe = 0.0;
    for (double x : data) probe += x * 0.0;
    if (probe == 0.0) return;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            std::ostringstream msg;
            msg << "non-finite value produced by '" << op << "' at flat index " << i;
            throw NumericalError(msg.str());
        }
    }
}

}  // namespace

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

double* detail::Node::grad_buffer() {
    if (grad.empty() && !data.empty()) grad.assign(data.size(), 0.0);
    return grad.data();
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (numel(shape) != data.size()) {
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }
    require_finite(data, "from");
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> data(numel(shape), value);
    return from(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->data.size(); }

std::size_t Tensor::dim(std::ptrdiff_t axis) const {
    const auto r = static_cast<std::ptrdiff_t>(rank());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) {
        throw DimensionError("axis out of range for shape " + shape_str(shape()));
    }
    return shape()[static_cast<std::size_t>(axis)];
}

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) throw DimensionError("index rank mismatch for " + shape_str(shape()));
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= shape()[axis]) throw DimensionError("index out of range for " + shape_str(shape()));
        flat = flat * shape()[axis] + i;
        ++axis;
    }
    return node_->data[flat];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { node_->requires_grad = flag; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }

std::span<double> Tensor::mutable_grad() {
    node_->grad_buffer();
    return node_->grad;
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }
void Tensor::clear_grad() { node_->grad.clear(); node_->grad.shrink_to_fit(); }

const char* Tensor::op_name() const { return node_->op; }

Tensor Tensor::detach() const {
    auto node = std::make_shared<detail::Node>();
    node->shape = node_->shape;
    node->data = node_->data;
    return Tensor(std::move(node));
}

Tensor Tensor::clone() const {
    Tensor out = detach();
    out.node_->requires_grad = node_->requires_grad;
    return out;
}

Tensor Tensor::make_result(Shape shape, std::vector<double> data, const char* op,
                           std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward_fn) {
    require_finite(data, op);
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    if (g_grad_enabled) {
        bool any = false;
        for (const auto& in : inputs) any = any || in.node_->requires_grad;
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(inputs.size());
            for (auto& in : inputs) node->parents.push_back(in.node_);
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor(std::move(node));
}

void Tensor::backward() {
    if (size() != 1) {
        throw DimensionError("backward() requires a scalar loss, got shape " + shape_str(shape()));
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    node_->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (!n->backward_fn || n->grad.empty()) continue;
        if (!g_fault_op.empty() && g_fault_op == n->op) {
            for (auto& g : n->grad) g *= g_fault_factor;
        }
        n->backward_fn(*n);
    }

    // Release the graph: interior nodes drop closures, parents and grads.
    for (detail::Node* n : order) {
        if (n->backward_fn) {
            n->backward_fn = nullptr;
            n->parents.clear();
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

namespace fault_injection {
void set_gradient_fault(std::string op, double factor) {
    g_fault_op = std::move(op);
    g_fault_factor = factor;
}
void clear_gradient_fault() {
    g_fault_op.clear();
    g_fault_factor = 1.0;
}
}  // namespace fault_injection

}  // namespace quite
