#include "quite/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <cblas.h>

#include "quite/errors.hpp"

namespace quite::ops {

namespace {

// C[m, n] += op(A) op(B), row-major, with op(A) m x k and op(B) k x n.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
          double* C) {
    if (m == 0 || n == 0 || k == 0) return;
    const auto M = static_cast<blasint>(m), N = static_cast<blasint>(n), K = static_cast<blasint>(k);
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, M, N, K, 1.0, A,
                ta ? M : K, B, tb ? K : N, 1.0, C, N);
}

std::size_t normalize_axis(std::ptrdiff_t axis, std::size_t rank, const Shape& shape) {
    const auto r = static_cast<std::ptrdiff_t>(rank);
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_str(shape));
    }
    return static_cast<std::size_t>(axis);
}

// Maps each flat index of a broadcast result back to flat indices of two
// operands. Cheap paths cover equal shapes and trailing-suffix broadcasts.
class BroadcastIndex {
public:
    BroadcastIndex(const Shape& a, const Shape& b) : out_(broadcast_shapes(a, b)) {
        na_ = numel(a);
        nb_ = numel(b);
        const std::size_t n = numel(out_);
        if (a == b) {
            mode_ = Mode::same;
        } else if (na_ == n && is_suffix(b, out_)) {
            mode_ = Mode::b_repeats;
        } else if (nb_ == n && is_suffix(a, out_)) {
            mode_ = Mode::a_repeats;
        } else {
            mode_ = Mode::general;
            ia_ = gather_map(a, n);
            ib_ = gather_map(b, n);
        }
    }

    const Shape& out() const { return out_; }
    std::size_t a(std::size_t i) const {
        switch (mode_) {
            case Mode::same:
            case Mode::b_repeats: return i;
            case Mode::a_repeats: return i % na_;
            default: return ia_[i];
        }
    }
    std::size_t b(std::size_t i) const {
        switch (mode_) {
            case Mode::same:
            case Mode::a_repeats: return i;
            case Mode::b_repeats: return i % nb_;
            default: return ib_[i];
        }
    }

private:
    enum class Mode { same, b_repeats, a_repeats, general };

    static bool is_suffix(const Shape& s, const Shape& out) {
        if (s.size() > out.size()) return false;
        return std::equal(s.begin(), s.end(), out.end() - static_cast<std::ptrdiff_t>(s.size()));
    }

    std::vector<std::size_t> gather_map(const Shape& s, std::size_t n) const {
        const std::size_t r = out_.size();
        const std::size_t off = r - s.size();
        std::vector<std::size_t> strides(r, 0);
        std::size_t stride = 1;
        for (std::size_t k = s.size(); k-- > 0;) {
            strides[k + off] = s[k] == 1 ? 0 : stride;
            stride *= s[k];
        }
        std::vector<std::size_t> map(n);
        std::vector<std::size_t> idx(r, 0);
        std::size_t flat = 0;
        for (std::size_t i = 0; i < n; ++i) {
            map[i] = flat;
            for (std::size_t k = r; k-- > 0;) {
                ++idx[k];
                flat += strides[k];
                if (idx[k] < out_[k]) break;
                flat -= strides[k] * idx[k];
                idx[k] = 0;
            }
        }
        return map;
    }

    Shape out_;
    Mode mode_ = Mode::same;
    std::size_t na_ = 0;
    std::size_t nb_ = 0;
    std::vector<std::size_t> ia_;
    std::vector<std::size_t> ib_;
};

enum class BinaryKind { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
    auto index = std::make_shared<BroadcastIndex>(a.shape(), b.shape());
    const std::size_t n = numel(index->out());
    std::vector<double> out(n);
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = da[index->a(i)];
        const double y = db[index->b(i)];
        switch (kind) {
            case BinaryKind::add: out[i] = x + y; break;
            case BinaryKind::sub: out[i] = x - y; break;
            case BinaryKind::mul: out[i] = x * y; break;
        }
    }
    return Tensor::make_result(index->out(), std::move(out), name, {a, b}, [index, kind, n](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const double* g = self.grad.data();
        if (pa.requires_grad) {
            double* ga = pa.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                const double scale = kind == BinaryKind::mul ? pb.data[index->b(i)] : 1.0;
                ga[index->a(i)] += g[i] * scale;
            }
        }
        if (pb.requires_grad) {
            double* gb = pb.grad_buffer();
            for (std::size_t i = 0; i < n; ++i) {
                double scale = 1.0;
                if (kind == BinaryKind::sub) scale = -1.0;
                if (kind == BinaryKind::mul) scale = pa.data[index->a(i)];
                gb[index->b(i)] += g[i] * scale;
            }
        }
    });
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

}  // namespace

Shape broadcast_shapes(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t da = k + a.size() >= r ? a[k + a.size() - r] : 1;
        const std::size_t db = k + b.size() >= r ? b[k + b.size() - r] : 1;
        if (da != db && da != 1 && db != 1) {
            throw DimensionError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
        }
        out[k] = da == 1 ? db : da;
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.data().begin(), a.data().end());
    for (auto& v : out) v *= factor;
    return Tensor::make_result(a.shape(), std::move(out), "scale", {a}, [factor](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor sin(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sin(x[i]);
    return Tensor::make_result(a.shape(), std::move(out), "sin", {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * std::cos(p.data[i]);
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return Tensor::make_result(a.shape(), std::move(out), "relu", {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (p.data[i] > 0.0) g[i] += self.grad[i];
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2 || a.dim(-1) != b.dim(-2)) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const std::size_t p = a.dim(-2), q = a.dim(-1), r = b.dim(-1);
    const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
    const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
    Shape batch;
    try {
        batch = broadcast_shapes(batch_a, batch_b);
    } catch (const DimensionError&) {
        throw DimensionError("matmul: batch extents of " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " do not broadcast");
    }
    const std::size_t nbatch = numel(batch);
    auto index = std::make_shared<BroadcastIndex>(batch_a, batch_b);
    Shape out_shape = batch;
    out_shape.push_back(p);
    out_shape.push_back(r);

    std::vector<double> out(nbatch * p * r, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (std::size_t t = 0; t < nbatch; ++t) {
        const double* At = A + index->a(t) * p * q;
        const double* Bt = B + index->b(t) * q * r;
        double* Ct = out.data() + t * p * r;
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t k = 0; k < q; ++k) {
                const double av = At[i * q + k];
                const double* brow = Bt + k * r;
                double* crow = Ct + i * r;
                for (std::size_t j = 0; j < r; ++j) crow[j] += av * brow[j];
            }
        }
    }
    return Tensor::make_result(std::move(out_shape), std::move(out), "matmul", {a, b},
                               [index, nbatch, p, q, r](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const double* G = self.grad.data();
        if (pa.requires_grad) {
            double* GA = pa.grad_buffer();
            for (std::size_t t = 0; t < nbatch; ++t) {
                const double* Bt = pb.data.data() + index->b(t) * q * r;
                const double* Gt = G + t * p * r;
                double* GAt = GA + index->a(t) * p * q;
                for (std::size_t i = 0; i < p; ++i) {
                    for (std::size_t k = 0; k < q; ++k) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < r; ++j) acc += Gt[i * r + j] * Bt[k * r + j];
                        GAt[i * q + k] += acc;
                    }
                }
            }
        }
        if (pb.requires_grad) {
            double* GB = pb.grad_buffer();
            for (std::size_t t = 0; t < nbatch; ++t) {
                const double* At = pa.data.data() + index->a(t) * p * q;
                const double* Gt = G + t * p * r;
                double* GBt = GB + index->b(t) * q * r;
                for (std::size_t i = 0; i < p; ++i) {
                    for (std::size_t k = 0; k < q; ++k) {
                        const double av = At[i * q + k];
                        for (std::size_t j = 0; j < r; ++j) GBt[k * r + j] += av * Gt[i * r + j];
                    }
                }
            }
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (x.rank() < 1 || weight.rank() != 2 || x.dim(-1) != weight.dim(0)) {
        throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                             shape_str(weight.shape()));
    }
    const std::size_t in = weight.dim(0), outw = weight.dim(1);
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != outw)) {
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " incompatible with weight " +
                             shape_str(weight.shape()));
    }
    const std::size_t rows = x.size() / in;
    Shape out_shape = x.shape();
    out_shape.back() = outw;
    std::vector<double> out(rows * outw, 0.0);
    if (bias.defined()) {
        for (std::size_t i = 0; i < rows; ++i) std::copy(bias.data().begin(), bias.data().end(), out.data() + i * outw);
    }
    gemm(false, false, rows, outw, in, x.data().data(), weight.data().data(), out.data());
    std::vector<Tensor> inputs{x, weight};
    const bool has_bias = bias.defined();
    if (has_bias) inputs.push_back(bias);
    return Tensor::make_result(std::move(out_shape), std::move(out), "linear", std::move(inputs),
                               [rows, in, outw, has_bias](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pw = *self.parents[1];
        const double* G = self.grad.data();
        if (px.requires_grad) gemm(false, true, rows, in, outw, G, pw.data.data(), px.grad_buffer());
        if (pw.requires_grad) gemm(true, false, in, outw, rows, px.data.data(), G, pw.grad_buffer());
        if (has_bias && self.parents[2]->requires_grad) {
            double* GB = self.parents[2]->grad_buffer();
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < outw; ++j) GB[j] += G[i * outw + j];
            }
        }
    });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.data()) total += v;
    return Tensor::make_result({}, {total}, "sum", {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t i = 0; i < p.data.size(); ++i) g[i] += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    if (a.size() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_axis(const Tensor& a, std::ptrdiff_t axis_in) {
    const std::size_t axis = normalize_axis(axis_in, a.rank(), a.shape());
    const Shape& s = a.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k) outer *= s[k];
    for (std::size_t k = axis + 1; k < s.size(); ++k) inner *= s[k];
    const std::size_t len = s[axis];
    Shape out_shape = s;
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    std::vector<double> out(outer * inner, 0.0);
    const auto x = a.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
            for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += x[(o * len + l) * inner + i];
    return Tensor::make_result(std::move(out_shape), std::move(out), "sum_axis", {a},
                               [outer, len, inner](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t l = 0; l < len; ++l)
                for (std::size_t i = 0; i < inner; ++i) g[(o * len + l) * inner + i] += self.grad[o * inner + i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) {
        throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    return Tensor::make_result(std::move(shape), std::move(out), "reshape", {a}, [](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& order) {
    const std::size_t r = a.rank();
    if (order.size() != r) throw DimensionError("permute: order rank mismatch for " + shape_str(a.shape()));
    std::vector<bool> used(r, false);
    for (auto o : order) {
        if (o >= r || used[o]) throw DimensionError("permute: invalid axis order");
        used[o] = true;
    }
    const Shape& s = a.shape();
    std::vector<std::size_t> in_strides(r, 1);
    for (std::size_t k = r; k-- > 1;) in_strides[k - 1] = in_strides[k] * s[k];
    Shape out_shape(r);
    std::vector<std::size_t> strides(r);
    for (std::size_t k = 0; k < r; ++k) {
        out_shape[k] = s[order[k]];
        strides[k] = in_strides[order[k]];
    }
    const std::size_t n = a.size();
    auto map = std::make_shared<std::vector<std::size_t>>(n);
    std::vector<std::size_t> idx(r, 0);
    std::size_t flat = 0;
    for (std::size_t i = 0; i < n; ++i) {
        (*map)[i] = flat;
        for (std::size_t k = r; k-- > 0;) {
            ++idx[k];
            flat += strides[k];
            if (idx[k] < out_shape[k]) break;
            flat -= strides[k] * idx[k];
            idx[k] = 0;
        }
    }
    std::vector<double> out(n);
    const auto x = a.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = x[(*map)[i]];
    return Tensor::make_result(std::move(out_shape), std::move(out), "permute", {a}, [map](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[(*map)[i]] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::ptrdiff_t axis_in) {
    if (parts.empty()) throw DimensionError("concat of zero tensors");
    const Shape& ref = parts[0].shape();
    const std::size_t axis = normalize_axis(axis_in, ref.size(), ref);
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k) outer *= ref[k];
    for (std::size_t k = axis + 1; k < ref.size(); ++k) inner *= ref[k];
    std::vector<std::size_t> lens;
    std::size_t total = 0;
    for (const auto& t : parts) {
        const Shape& s = t.shape();
        bool ok = s.size() == ref.size();
        for (std::size_t k = 0; ok && k < s.size(); ++k) ok = k == axis || s[k] == ref[k];
        if (!ok) {
            throw DimensionError("concat: shape " + shape_str(s) + " incompatible with " + shape_str(ref));
        }
        lens.push_back(s[axis]);
        total += s[axis];
    }
    Shape out_shape = ref;
    out_shape[axis] = total;
    std::vector<double> out(outer * total * inner);
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto x = parts[p].data();
        const std::size_t chunk = lens[p] * inner;
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                        out.begin() + static_cast<std::ptrdiff_t>(o * total * inner + offset));
        }
        offset += chunk;
    }
    return Tensor::make_result(std::move(out_shape), std::move(out), "concat", parts,
                               [lens, outer, inner, total](detail::Node& self) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            auto& parent = *self.parents[p];
            const std::size_t chunk = lens[p] * inner;
            if (parent.requires_grad) {
                double* g = parent.grad_buffer();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < chunk; ++i) g[o * chunk + i] += self.grad[o * total * inner + offset + i];
            }
            offset += chunk;
        }
    });
}

Tensor slice(const Tensor& a, std::ptrdiff_t axis_in, std::size_t start, std::size_t length) {
    const std::size_t axis = normalize_axis(axis_in, a.rank(), a.shape());
    const Shape& s = a.shape();
    if (start + length > s[axis]) {
        throw DimensionError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                             ") out of range for shape " + shape_str(s));
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k) outer *= s[k];
    for (std::size_t k = axis + 1; k < s.size(); ++k) inner *= s[k];
    const std::size_t len = s[axis];
    Shape out_shape = s;
    out_shape[axis] = length;
    std::vector<double> out(outer * length * inner);
    const auto x = a.data();
    for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>((o * len + start) * inner), length * inner,
                    out.begin() + static_cast<std::ptrdiff_t>(o * length * inner));
    }
    return Tensor::make_result(std::move(out_shape), std::move(out), "slice", {a},
                               [outer, len, inner, start, length](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < length * inner; ++i)
                g[(o * len + start) * inner + i] += self.grad[o * length * inner + i];
    });
}

Tensor index_select(const Tensor& a, std::ptrdiff_t axis_in, std::span<const std::size_t> indices) {
    const std::size_t axis = normalize_axis(axis_in, a.rank(), a.shape());
    const Shape& s = a.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t k = 0; k < axis; ++k) outer *= s[k];
    for (std::size_t k = axis + 1; k < s.size(); ++k) inner *= s[k];
    const std::size_t len = s[axis];
    for (auto i : indices) {
        if (i >= len) throw DimensionError("index_select: index " + std::to_string(i) + " out of range");
    }
    auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
    const std::size_t count = idx->size();
    Shape out_shape = s;
    out_shape[axis] = count;
    std::vector<double> out(outer * count * inner);
    const auto x = a.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t c = 0; c < count; ++c)
            std::copy_n(x.begin() + static_cast<std::ptrdiff_t>((o * len + (*idx)[c]) * inner), inner,
                        out.begin() + static_cast<std::ptrdiff_t>((o * count + c) * inner));
    return Tensor::make_result(std::move(out_shape), std::move(out), "index_select", {a},
                               [idx, outer, len, inner, count](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t c = 0; c < count; ++c)
                for (std::size_t i = 0; i < inner; ++i)
                    g[(o * len + (*idx)[c]) * inner + i] += self.grad[(o * count + c) * inner + i];
    });
}

Tensor masked_softmax(const Tensor& scores, const Tensor& valid) {
    if (scores.rank() < 1) throw DimensionError("masked_softmax on a scalar");
    const Shape out_shape = broadcast_shapes(scores.shape(), valid.shape());
    if (out_shape != scores.shape()) {
        throw DimensionError("masked_softmax: mask " + shape_str(valid.shape()) +
                             " does not broadcast to scores " + shape_str(scores.shape()));
    }
    BroadcastIndex index(scores.shape(), valid.shape());
    const std::size_t k = scores.dim(-1);
    const std::size_t rows = k == 0 ? 0 : scores.size() / k;
    const auto s = scores.data();
    const auto m = valid.data();
    std::vector<double> out(scores.size());
    constexpr double kMaskedLogit = -1e9;
    for (std::size_t row = 0; row < rows; ++row) {
        double* o = out.data() + row * k;
        double best = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t i = row * k + j;
            const bool ok = m[index.b(i)] != 0.0;
            any = any || ok;
            o[j] = s[i] + (ok ? 0.0 : kMaskedLogit);
            best = std::max(best, o[j]);
        }
        if (!any) {
            throw ValidationError("masked_softmax: row " + std::to_string(row) + " has no valid position");
        }
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const bool ok = m[index.b(row * k + j)] != 0.0;
            o[j] = ok ? std::exp(o[j] - best) : 0.0;
            total += o[j];
        }
        for (std::size_t j = 0; j < k; ++j) o[j] /= total;
    }
    return Tensor::make_result(scores.shape(), std::move(out), "masked_softmax", {scores},
                               [rows, k](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        for (std::size_t row = 0; row < rows; ++row) {
            const double* y = self.data.data() + row * k;
            const double* dy = self.grad.data() + row * k;
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += y[j] * dy[j];
            for (std::size_t j = 0; j < k; ++j) g[row * k + j] += y[j] * (dy[j] - dot);
        }
    });
}

Tensor softmax(const Tensor& scores) {
    return masked_softmax(scores, Tensor::full({1}, 1.0));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    if (x.rank() < 1 || x.dim(-1) == 0) throw DimensionError("layer_norm needs a nonempty last axis");
    const std::size_t d = x.dim(-1);
    if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
        throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" + shape_str(bias.shape()) +
                             " do not match width " + std::to_string(d));
    }
    const std::size_t rows = x.size() / d;
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    std::vector<double> out(x.size());
    const auto xs = x.data();
    const auto gs = gain.data();
    const auto bs = bias.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = xs.data() + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        (*inv_std)[r] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const double h = (row[j] - mu) * inv;
            (*xhat)[r * d + j] = h;
            out[r * d + j] = h * gs[j] + bs[j];
        }
    }
    return Tensor::make_result(x.shape(), std::move(out), "layer_norm", {x, gain, bias},
                               [xhat, inv_std, rows, d](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const double* G = self.grad.data();
        if (pg.requires_grad || pb.requires_grad) {
            double* gg = pg.requires_grad ? pg.grad_buffer() : nullptr;
            double* gb = pb.requires_grad ? pb.grad_buffer() : nullptr;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < d; ++j) {
                    if (gg) gg[j] += G[r * d + j] * (*xhat)[r * d + j];
                    if (gb) gb[j] += G[r * d + j];
                }
        }
        if (px.requires_grad) {
            double* gx = px.grad_buffer();
            const double inv_d = 1.0 / static_cast<double>(d);
            for (std::size_t r = 0; r < rows; ++r) {
                double mean_dh = 0.0, mean_dh_h = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double dh = G[r * d + j] * pg.data[j];
                    mean_dh += dh;
                    mean_dh_h += dh * (*xhat)[r * d + j];
                }
                mean_dh *= inv_d;
                mean_dh_h *= inv_d;
                for (std::size_t j = 0; j < d; ++j) {
                    const double dh = G[r * d + j] * pg.data[j];
                    gx[r * d + j] += (*inv_std)[r] * (dh - mean_dh - (*xhat)[r * d + j] * mean_dh_h);
                }
            }
        }
    });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, const Tensor& weight) {
    check_same_shape(pred, target, "mse_loss");
    check_same_shape(pred, weight, "mse_loss");
    const auto p = pred.data();
    const auto t = target.data();
    const auto w = weight.data();
    double wsum = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        wsum += w[i];
        acc += w[i] * (p[i] - t[i]) * (p[i] - t[i]);
    }
    if (wsum <= 0.0) throw ValidationError("mse_loss: no target carries positive weight");
    auto tw = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>(
        std::vector<double>(t.begin(), t.end()), std::vector<double>(w.begin(), w.end()));
    return Tensor::make_result({}, {acc / wsum}, "mse_loss", {pred}, [tw, wsum](detail::Node& self) {
        auto& pp = *self.parents[0];
        double* g = pp.grad_buffer();
        const auto& [tv, wv] = *tw;
        for (std::size_t i = 0; i < tv.size(); ++i) {
            g[i] += self.grad[0] * 2.0 * wv[i] * (pp.data[i] - tv[i]) / wsum;
        }
    });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    return mse_loss(pred, target, Tensor::full(pred.shape(), 1.0));
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
        throw DimensionError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                             std::to_string(labels.size()) + " labels");
    }
    const std::size_t b = logits.dim(0), c = logits.dim(1);
    if (b == 0) throw ValidationError("cross_entropy on an empty batch");
    auto probs = std::make_shared<std::vector<double>>(b * c);
    auto labs = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
    const auto z = logits.data();
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw ValidationError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(c) + ")");
        }
        const double* row = z.data() + i * c;
        const double best = *std::max_element(row, row + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - best);
        for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] = std::exp(row[j] - best) / total;
        loss -= row[static_cast<std::size_t>(y)] - best - std::log(total);
    }
    loss /= static_cast<double>(b);
    return Tensor::make_result({}, {loss}, "cross_entropy", {logits}, [probs, labs, b, c](detail::Node& self) {
        auto& p = *self.parents[0];
        double* g = p.grad_buffer();
        const double s = self.grad[0] / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const double onehot = static_cast<std::size_t>((*labs)[i]) == j ? 1.0 : 0.0;
                g[i * c + j] += s * ((*probs)[i * c + j] - onehot);
            }
    });
}

}  // namespace quite::ops
