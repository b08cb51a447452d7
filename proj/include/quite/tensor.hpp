#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace quite {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until something flows into it
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(Node&)> backward_fn;

    double* grad_buffer();  // allocates zeros on first use
};

}  // namespace detail

/// Dense row-major float64 array taking part in a reverse-mode graph.
///
/// A Tensor is a cheap handle; copies share the underlying storage. Every
/// operation producing a Tensor from inputs that require gradients records a
/// backward closure on the result. `backward()` walks the recorded graph in
/// reverse topological order and then releases it.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    std::size_t dim(std::ptrdiff_t axis) const;

    std::span<const double> data() const;
    // Writes bypass the graph; only meant for leaves (parameters, inputs).
    std::span<double> mutable_data();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool has_grad() const;
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();   // fills an existing grad buffer with zeros
    void clear_grad();  // drops the grad buffer entirely

    // Populates d(this)/d(leaf) in every reachable leaf requiring grad.
    // Accumulates into existing leaf grads. Releases the graph afterwards.
    void backward();

    // Same storage contents, no graph history.
    Tensor detach() const;
    Tensor clone() const;

    const char* op_name() const;

    static Tensor make_result(Shape shape, std::vector<double> data, const char* op,
                              std::vector<Tensor> inputs,
                              std::function<void(detail::Node&)> backward_fn);
    detail::Node& node() const { return *node_; }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

/// Disables graph recording on this thread while alive.
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

namespace fault_injection {
// Scales the upstream gradient entering every node whose op name matches.
// Empty name disables. Used by the grad-check mutation test.
void set_gradient_fault(std::string op, double factor);
void clear_gradient_fault();
}  // namespace fault_injection

}  // namespace quite
