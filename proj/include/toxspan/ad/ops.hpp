#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tape.hpp"
#include "tensor.hpp"

namespace toxspan::ad {

// Axis::Rows runs down the rows (numpy axis 0), Axis::Cols along a row (axis 1).
enum class Axis { Rows = 0, Cols = 1 };

namespace detail {

inline std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* op, const Shape& sa, const Shape& sb)
{
    if (a == b) return a;
    if (a == 1) return b;
    if (b == 1) return a;
    throw ShapeError(std::string(op) + ": incompatible shapes " + sa.str() + " and " + sb.str());
}

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op)
{
    return {broadcast_dim(a.rows, b.rows, op, a, b), broadcast_dim(a.cols, b.cols, op, a, b)};
}

inline double at_broadcast(const Tensor& t, std::size_t r, std::size_t c)
{
    return t(t.rows() == 1 ? 0 : r, t.cols() == 1 ? 0 : c);
}

// Sums a gradient of the broadcast shape back down to `target`.
inline Tensor reduce_to(const Tensor& g, const Shape& target)
{
    if (g.shape() == target) return g;
    Tensor out(target);
    for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
            out(target.rows == 1 ? 0 : r, target.cols == 1 ? 0 : c) += g(r, c);
        }
    }
    return out;
}

// a (m x k) * b (k x n)
inline Tensor matmul(const Tensor& a, const Tensor& b)
{
    if (a.cols() != b.rows()) throw ShapeError("matmul: incompatible shapes " + a.shape().str() + " and " + b.shape().str());
    Tensor out(a.rows(), b.cols());
    const auto n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.data().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double av = a(i, k);
            if (av == 0.0) continue;
            const double* brow = b.data().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

// g (m x n) * b^T, b is (k x n)
inline Tensor matmul_nt(const Tensor& g, const Tensor& b)
{
    Tensor out(g.rows(), b.rows());
    for (std::size_t i = 0; i < g.rows(); ++i) {
        const auto grow = g.row_span(i);
        for (std::size_t k = 0; k < b.rows(); ++k) {
            const auto brow = b.row_span(k);
            double acc = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) acc += grow[j] * brow[j];
            out(i, k) = acc;
        }
    }
    return out;
}

// a^T * g, a is (m x k), g is (m x n)
inline Tensor matmul_tn(const Tensor& a, const Tensor& g)
{
    Tensor out(a.cols(), g.cols());
    const auto n = g.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* grow = g.data().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double av = a(i, k);
            if (av == 0.0) continue;
            double* orow = out.data().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
        }
    }
    return out;
}

template <typename Fn>
Var unary(const Var& a, Fn&& fn, Tape::BackwardFn backward)
{
    const auto& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i]);
    return a.tape().record(std::move(out), {a}, std::move(backward));
}

} // namespace detail

inline Var add(const Var& a, const Var& b)
{
    const auto& x = a.value();
    const auto& y = b.value();
    const auto shape = detail::broadcast_shape(x.shape(), y.shape(), "add");
    Tensor out(shape);
    if (x.shape() == y.shape()) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
    } else {
        for (std::size_t r = 0; r < shape.rows; ++r)
            for (std::size_t c = 0; c < shape.cols; ++c)
                out(r, c) = detail::at_broadcast(x, r, c) + detail::at_broadcast(y, r, c);
    }
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        if (a.requires_grad()) t.accumulate(a, detail::reduce_to(g, a.shape()));
        if (b.requires_grad()) t.accumulate(b, detail::reduce_to(g, b.shape()));
    });
}

inline Var sub(const Var& a, const Var& b)
{
    const auto& x = a.value();
    const auto& y = b.value();
    const auto shape = detail::broadcast_shape(x.shape(), y.shape(), "sub");
    Tensor out(shape);
    for (std::size_t r = 0; r < shape.rows; ++r)
        for (std::size_t c = 0; c < shape.cols; ++c)
            out(r, c) = detail::at_broadcast(x, r, c) - detail::at_broadcast(y, r, c);
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        if (a.requires_grad()) t.accumulate(a, detail::reduce_to(g, a.shape()));
        if (b.requires_grad()) t.accumulate(b, -1.0 * detail::reduce_to(g, b.shape()));
    });
}

// Elementwise product.
inline Var mul(const Var& a, const Var& b)
{
    const auto& x = a.value();
    const auto& y = b.value();
    const auto shape = detail::broadcast_shape(x.shape(), y.shape(), "mul");
    Tensor out(shape);
    for (std::size_t r = 0; r < shape.rows; ++r)
        for (std::size_t c = 0; c < shape.cols; ++c)
            out(r, c) = detail::at_broadcast(x, r, c) * detail::at_broadcast(y, r, c);
    return a.tape().record(std::move(out), {a, b}, [a, b, shape](Tape& t, const Tensor& g) {
        const auto& x = a.value();
        const auto& y = b.value();
        if (a.requires_grad()) {
            Tensor ga(shape);
            for (std::size_t r = 0; r < shape.rows; ++r)
                for (std::size_t c = 0; c < shape.cols; ++c) ga(r, c) = g(r, c) * detail::at_broadcast(y, r, c);
            t.accumulate(a, detail::reduce_to(ga, x.shape()));
        }
        if (b.requires_grad()) {
            Tensor gb(shape);
            for (std::size_t r = 0; r < shape.rows; ++r)
                for (std::size_t c = 0; c < shape.cols; ++c) gb(r, c) = g(r, c) * detail::at_broadcast(x, r, c);
            t.accumulate(b, detail::reduce_to(gb, y.shape()));
        }
    });
}

inline Var scale(const Var& a, double s)
{
    return detail::unary(a, [s](double v) { return v * s; },
                         [a, s](Tape& t, const Tensor& g) { t.accumulate(a, s * g); });
}

inline Var neg(const Var& a) { return scale(a, -1.0); }

inline Var matmul(const Var& a, const Var& b)
{
    Tensor out = detail::matmul(a.value(), b.value());
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        if (a.requires_grad()) t.accumulate(a, detail::matmul_nt(g, b.value()));
        if (b.requires_grad()) t.accumulate(b, detail::matmul_tn(a.value(), g));
    });
}

inline Var concat(const std::vector<Var>& parts, Axis axis)
{
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const auto first = parts.front().shape();
    std::size_t total = 0;
    for (const auto& p : parts) {
        const auto& s = p.shape();
        const bool ok = axis == Axis::Rows ? s.cols == first.cols : s.rows == first.rows;
        if (!ok) throw ShapeError("concat: incompatible shapes " + first.str() + " and " + s.str());
        total += axis == Axis::Rows ? s.rows : s.cols;
    }
    Tensor out = axis == Axis::Rows ? Tensor(total, first.cols) : Tensor(first.rows, total);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const auto& v = p.value();
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) {
                if (axis == Axis::Rows) out(offset + r, c) = v(r, c);
                else out(r, offset + c) = v(r, c);
            }
        offset += axis == Axis::Rows ? v.rows() : v.cols();
    }
    return parts.front().tape().record(std::move(out), parts, [parts, axis](Tape& t, const Tensor& g) {
        std::size_t offset = 0;
        for (const auto& p : parts) {
            const auto& s = p.shape();
            if (p.requires_grad()) {
                Tensor* slot = t.grad_slot(p);
                for (std::size_t r = 0; r < s.rows; ++r)
                    for (std::size_t c = 0; c < s.cols; ++c)
                        (*slot)(r, c) += axis == Axis::Rows ? g(offset + r, c) : g(r, offset + c);
            }
            offset += axis == Axis::Rows ? s.rows : s.cols;
        }
    });
}

// Rows [begin, end) for Axis::Rows, columns [begin, end) for Axis::Cols.
inline Var slice(const Var& a, Axis axis, std::size_t begin, std::size_t end)
{
    const auto& x = a.value();
    const auto limit = axis == Axis::Rows ? x.rows() : x.cols();
    if (begin >= end || end > limit) {
        throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of shape " +
                         x.shape().str());
    }
    Tensor out = axis == Axis::Rows ? Tensor(end - begin, x.cols()) : Tensor(x.rows(), end - begin);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c)
            out(r, c) = axis == Axis::Rows ? x(begin + r, c) : x(r, begin + c);
    return a.tape().record(std::move(out), {a}, [a, axis, begin](Tape& t, const Tensor& g) {
        Tensor* slot = t.grad_slot(a);
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < g.cols(); ++c) {
                if (axis == Axis::Rows) (*slot)(begin + r, c) += g(r, c);
                else (*slot)(r, begin + c) += g(r, c);
            }
    });
}

// Embedding lookup: row ids[i] of `table` becomes row i of the result.
inline Var gather_rows(const Var& table, std::span<const std::size_t> ids)
{
    const auto& x = table.value();
    Tensor out(ids.size(), x.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= x.rows()) {
            throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " out of range for table " + x.shape().str());
        }
        std::copy_n(x.row_span(ids[i]).begin(), x.cols(), out.row_span(i).begin());
    }
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    return table.tape().record(std::move(out), {table}, [table, idx = std::move(idx)](Tape& t, const Tensor& g) {
        Tensor* slot = t.grad_slot(table);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto dst = slot->row_span(idx[i]);
            auto src = g.row_span(i);
            for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
        }
    });
}

inline Var reshape(const Var& a, std::size_t rows, std::size_t cols)
{
    Tensor out = a.value().reshaped(rows, cols);
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
        t.accumulate(a, g.reshaped(a.shape().rows, a.shape().cols));
    });
}

inline Var tanh(const Var& a)
{
    const auto& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
    Tensor saved = out;
    return a.tape().record(std::move(out), {a}, [a, y = std::move(saved)](Tape& t, const Tensor& g) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * (1.0 - y[i] * y[i]);
        t.accumulate(a, ga);
    });
}

inline Var sigmoid(const Var& a)
{
    const auto& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    Tensor saved = out;
    return a.tape().record(std::move(out), {a}, [a, saved = std::move(saved)](Tape& t, const Tensor& g) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * saved[i] * (1.0 - saved[i]);
        t.accumulate(a, ga);
    });
}

inline Var exp(const Var& a)
{
    const auto& x = a.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]);
    Tensor saved = out;
    return a.tape().record(std::move(out), {a}, [a, saved = std::move(saved)](Tape& t, const Tensor& g) {
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * saved[i];
        t.accumulate(a, ga);
    });
}

inline Var log(const Var& a)
{
    return detail::unary(a, [](double v) { return std::log(v); }, [a](Tape& t, const Tensor& g) {
        const auto& x = a.value();
        Tensor ga(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] / x[i];
        t.accumulate(a, ga);
    });
}

inline Var sum(const Var& a)
{
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
        t.accumulate(a, Tensor(a.shape(), g[0]));
    });
}

inline Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

inline Var sum(const Var& a, Axis axis)
{
    const auto& x = a.value();
    Tensor out = axis == Axis::Rows ? Tensor(1, x.cols()) : Tensor(x.rows(), 1);
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) {
            if (axis == Axis::Rows) out(0, c) += x(r, c);
            else out(r, 0) += x(r, c);
        }
    return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
        Tensor ga(a.shape());
        for (std::size_t r = 0; r < ga.rows(); ++r)
            for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) = detail::at_broadcast(g, r, c);
        t.accumulate(a, ga);
    });
}

// Maximum along an axis; the gradient goes to the first maximal entry.
inline Var max(const Var& a, Axis axis)
{
    const auto& x = a.value();
    if (x.empty()) throw ShapeError("max: empty tensor");
    const bool rows = axis == Axis::Rows;
    const std::size_t outer = rows ? x.cols() : x.rows();
    const std::size_t inner = rows ? x.rows() : x.cols();
    Tensor out = rows ? Tensor(1, outer) : Tensor(outer, 1);
    std::vector<std::size_t> arg(outer, 0);
    for (std::size_t o = 0; o < outer; ++o) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < inner; ++i) {
            const double v = rows ? x(i, o) : x(o, i);
            if (v > best) {
                best = v;
                arg[o] = i;
            }
        }
        out[o] = best;
    }
    return a.tape().record(std::move(out), {a}, [a, rows, arg = std::move(arg)](Tape& t, const Tensor& g) {
        Tensor* slot = t.grad_slot(a);
        for (std::size_t o = 0; o < arg.size(); ++o) {
            if (rows) (*slot)(arg[o], o) += g[o];
            else (*slot)(o, arg[o]) += g[o];
        }
    });
}

namespace detail {

// Row-wise (Axis::Cols) or column-wise (Axis::Rows) softmax with max shift.
inline Tensor softmax_values(const Tensor& x, Axis axis, Tensor* lse = nullptr)
{
    const bool rows = axis == Axis::Rows;
    const std::size_t outer = rows ? x.cols() : x.rows();
    const std::size_t inner = rows ? x.rows() : x.cols();
    if (inner == 0) throw ShapeError("softmax: empty axis in shape " + x.shape().str());
    Tensor out(x.shape());
    if (lse != nullptr) *lse = rows ? Tensor(1, outer) : Tensor(outer, 1);
    for (std::size_t o = 0; o < outer; ++o) {
        auto at = [&](std::size_t i) -> double { return rows ? x(i, o) : x(o, i); };
        double m = at(0);
        for (std::size_t i = 1; i < inner; ++i) m = std::max(m, at(i));
        double z = 0.0;
        for (std::size_t i = 0; i < inner; ++i) {
            const double e = std::exp(at(i) - m);
            (rows ? out(i, o) : out(o, i)) = e;
            z += e;
        }
        for (std::size_t i = 0; i < inner; ++i) (rows ? out(i, o) : out(o, i)) /= z;
        if (lse != nullptr) (*lse)[o] = m + std::log(z);
    }
    return out;
}

} // namespace detail

// m + log(sum(exp(x - m))) along an axis.
inline Var log_sum_exp(const Var& a, Axis axis)
{
    Tensor lse;
    Tensor probs = detail::softmax_values(a.value(), axis, &lse);
    return a.tape().record(std::move(lse), {a}, [a, probs = std::move(probs)](Tape& t, const Tensor& g) {
        Tensor ga(probs.shape());
        for (std::size_t r = 0; r < ga.rows(); ++r)
            for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) = probs(r, c) * detail::at_broadcast(g, r, c);
        t.accumulate(a, ga);
    });
}

inline Var softmax(const Var& a, Axis axis)
{
    Tensor out = detail::softmax_values(a.value(), axis);
    Tensor saved = out;
    return a.tape().record(std::move(out), {a}, [a, axis, y = std::move(saved)](Tape& t, const Tensor& g) {
        // dx = y * (g - <g, y>) along the axis
        const bool rows = axis == Axis::Rows;
        const std::size_t outer = rows ? y.cols() : y.rows();
        const std::size_t inner = rows ? y.rows() : y.cols();
        Tensor ga(y.shape());
        for (std::size_t o = 0; o < outer; ++o) {
            double dot = 0.0;
            for (std::size_t i = 0; i < inner; ++i) dot += rows ? g(i, o) * y(i, o) : g(o, i) * y(o, i);
            for (std::size_t i = 0; i < inner; ++i) {
                if (rows) ga(i, o) = y(i, o) * (g(i, o) - dot);
                else ga(o, i) = y(o, i) * (g(o, i) - dot);
            }
        }
        t.accumulate(a, ga);
    });
}

inline Var log_softmax(const Var& a, Axis axis)
{
    Tensor lse;
    Tensor probs = detail::softmax_values(a.value(), axis, &lse);
    const auto& x = a.value();
    Tensor out(x.shape());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) - (axis == Axis::Rows ? lse[c] : lse[r]);
    return a.tape().record(std::move(out), {a}, [a, axis, p = std::move(probs)](Tape& t, const Tensor& g) {
        // dx = g - p * sum(g) along the axis
        const bool rows = axis == Axis::Rows;
        const std::size_t outer = rows ? p.cols() : p.rows();
        const std::size_t inner = rows ? p.rows() : p.cols();
        Tensor ga(p.shape());
        for (std::size_t o = 0; o < outer; ++o) {
            double total = 0.0;
            for (std::size_t i = 0; i < inner; ++i) total += rows ? g(i, o) : g(o, i);
            for (std::size_t i = 0; i < inner; ++i) {
                if (rows) ga(i, o) = g(i, o) - p(i, o) * total;
                else ga(o, i) = g(o, i) - p(o, i) * total;
            }
        }
        t.accumulate(a, ga);
    });
}

// Same value, no gradient path.
inline Var detach(const Var& a) { return a.tape().constant(a.value()); }

// v / max(||v||_2, floor), norm taken over the whole tensor.
inline Var l2_normalize(const Var& a, double floor = 1e-12)
{
    if (!(floor > 0.0)) throw std::invalid_argument("l2_normalize: floor must be positive");
    const auto& x = a.value();
    const double n = x.norm();
    const double denom = std::max(n, floor);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / denom;
    Tensor saved = out;
    const bool clamped = n < floor;
    return a.tape().record(std::move(out), {a}, [a, denom, clamped, y = std::move(saved)](Tape& t, const Tensor& g) {
        Tensor ga(g.shape());
        if (clamped) {
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] / denom;
        } else {
            double dot = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] = (g[i] - y[i] * dot) / denom;
        }
        t.accumulate(a, ga);
    });
}

} // namespace toxspan::ad
