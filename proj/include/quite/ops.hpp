#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "quite/tensor.hpp"

// Differentiable operations. Every function builds a new Tensor and, when an
// input requires gradients, records how to push gradients back to it.
namespace quite::ops {

// Pointwise, with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sin(const Tensor& a);
Tensor relu(const Tensor& a);

/// Batched matrix product over the last two axes; leading axes broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[..., in] * weight[in, out] + bias[out]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sums out one axis (the axis is removed from the shape).
Tensor sum_axis(const Tensor& a, std::ptrdiff_t axis);

Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& order);
Tensor concat(const std::vector<Tensor>& parts, std::ptrdiff_t axis);
Tensor slice(const Tensor& a, std::ptrdiff_t axis, std::size_t start, std::size_t length);
Tensor index_select(const Tensor& a, std::ptrdiff_t axis, std::span<const std::size_t> indices);

/// Softmax over the last axis restricted to positions where `valid` is
/// nonzero. `valid` is a constant mask broadcastable to `scores`. Invalid
/// positions get exactly 0. A row without any valid position is an error.
Tensor masked_softmax(const Tensor& scores, const Tensor& valid);
Tensor softmax(const Tensor& scores);

inline constexpr double kLayerNormEpsilon = 1e-5;
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

/// Weighted mean squared error: sum w (p - t)^2 / sum w. `target` and
/// `weight` are treated as constants; both must match `pred` in shape.
Tensor mse_loss(const Tensor& pred, const Tensor& target, const Tensor& weight);
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Mean negative log-likelihood of `labels` under softmax(logits[B, C]).
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

Shape broadcast_shapes(const Shape& a, const Shape& b);

}  // namespace quite::ops
