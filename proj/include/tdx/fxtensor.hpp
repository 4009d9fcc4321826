#pragma once

// Fixed-point tensors and the integer layer kernels of the detector CNN.
// All rescales round toward -infinity (arithmetic shift), which is exactly
// what the circuit's quotient/remainder gadget certifies.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdx/errors.hpp"

namespace tdx {

using Shape = std::vector<size_t>;

inline size_t shape_size(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

/// Real-valued tensor, flat row-major.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(shape_size(shape), 0.0) {}
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != shape_size(shape)) throw ShapeError("tensor data/shape mismatch");
    }

    size_t size() const { return data.size(); }
    double& at(size_t c, size_t i, size_t j) { return data[(c * shape[1] + i) * shape[2] + j]; }
    double at(size_t c, size_t i, size_t j) const { return data[(c * shape[1] + i) * shape[2] + j]; }
};

/// Integer tensor with value = data * 2^-frac_bits.
struct QuantTensor {
    Shape shape;
    std::vector<int64_t> data;
    int frac_bits = 0;

    QuantTensor() = default;
    QuantTensor(Shape s, int f) : shape(std::move(s)), data(shape_size(shape), 0), frac_bits(f) {}
    QuantTensor(Shape s, std::vector<int64_t> d, int f) : shape(std::move(s)), data(std::move(d)), frac_bits(f) {
        if (data.size() != shape_size(shape)) throw ShapeError("quant tensor data/shape mismatch");
    }

    size_t size() const { return data.size(); }
    int64_t& at(size_t c, size_t i, size_t j) { return data[(c * shape[1] + i) * shape[2] + j]; }
    int64_t at(size_t c, size_t i, size_t j) const { return data[(c * shape[1] + i) * shape[2] + j]; }

    int64_t max_abs() const {
        int64_t m = 0;
        for (int64_t v : data) m = std::max(m, v < 0 ? -v : v);
        return m;
    }
    /// True when every |element| < 2^bits.
    bool within_bits(int bits) const { return bits >= 63 || max_abs() < (int64_t{1} << bits); }

    friend bool operator==(const QuantTensor&, const QuantTensor&) = default;
};

/// floor(v / 2^k)
inline int64_t floor_shift(int64_t v, int k) { return v >> k; }

inline QuantTensor quantize(const Tensor& t, int f) {
    if (f < 4 || f > 16) throw std::invalid_argument("quantize: frac bits must be in [4, 16]");
    QuantTensor q(t.shape, f);
    const double scale = std::ldexp(1.0, f);
    constexpr double kLimit = 2147483648.0; // 2^31
    for (size_t i = 0; i < t.size(); ++i) {
        const double r = std::round(t.data[i] * scale); // half away from zero
        if (!std::isfinite(r) || std::fabs(r) >= kLimit) throw OverflowError("quantize: magnitude >= 2^31");
        q.data[i] = static_cast<int64_t>(r);
    }
    return q;
}

inline Tensor dequantize(const QuantTensor& q) {
    Tensor t(q.shape);
    for (size_t i = 0; i < q.size(); ++i) t.data[i] = std::ldexp(static_cast<double>(q.data[i]), -q.frac_bits);
    return t;
}

namespace detail {
inline void require_chw(const Shape& s, const char* what) {
    if (s.size() != 3) throw ShapeError(std::string(what) + ": expected (C,H,W), got " + shape_str(s));
}
inline void require_conv_params(const Shape& xs, const Shape& ws, const Shape& bs) {
    require_chw(xs, "conv2d");
    if (ws.size() != 4 || ws[2] != 3 || ws[3] != 3) throw ShapeError("conv2d: kernel must be (Cout,Cin,3,3)");
    if (ws[1] != xs[0]) throw ShapeError("conv2d: channel mismatch");
    if (bs.size() != 1 || bs[0] != ws[0]) throw ShapeError("conv2d: bias shape mismatch");
}
} // namespace detail

/// Raw 3x3 same-padded convolution accumulator at scale 2f (bias included), before rescale.
inline QuantTensor conv2d_acc(const QuantTensor& x, const QuantTensor& w, const QuantTensor& b) {
    detail::require_conv_params(x.shape, w.shape, b.shape);
    if (x.frac_bits != w.frac_bits || b.frac_bits != 2 * x.frac_bits)
        throw ShapeError("conv2d: scale mismatch");
    const size_t cout = w.shape[0], cin = w.shape[1], h = x.shape[1], wd = x.shape[2];
    QuantTensor acc({cout, h, wd}, 2 * x.frac_bits);
    for (size_t co = 0; co < cout; ++co)
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < wd; ++j) {
                int64_t s = b.data[co];
                for (size_t ci = 0; ci < cin; ++ci)
                    for (size_t di = 0; di < 3; ++di) {
                        const long ii = static_cast<long>(i + di) - 1;
                        if (ii < 0 || ii >= static_cast<long>(h)) continue;
                        for (size_t dj = 0; dj < 3; ++dj) {
                            const long jj = static_cast<long>(j + dj) - 1;
                            if (jj < 0 || jj >= static_cast<long>(wd)) continue;
                            s += w.data[((co * cin + ci) * 3 + di) * 3 + dj] * x.at(ci, ii, jj);
                        }
                    }
                acc.at(co, i, j) = s;
            }
    return acc;
}

/// Rescale from 2f to f by floor division.
inline QuantTensor rescale(const QuantTensor& acc, int f) {
    QuantTensor out(acc.shape, acc.frac_bits - f);
    for (size_t i = 0; i < acc.size(); ++i) out.data[i] = floor_shift(acc.data[i], f);
    return out;
}

inline QuantTensor conv2d_q(const QuantTensor& x, const QuantTensor& w, const QuantTensor& b) {
    return rescale(conv2d_acc(x, w, b), x.frac_bits);
}

inline QuantTensor leaky_relu_q(const QuantTensor& x, int slope_shift) {
    if (slope_shift < 1) throw std::invalid_argument("leaky_relu_q: slope shift must be >= 1");
    QuantTensor out = x;
    for (auto& v : out.data)
        if (v < 0) v = floor_shift(v, slope_shift);
    return out;
}

inline QuantTensor maxpool2x2_q(const QuantTensor& x) {
    detail::require_chw(x.shape, "maxpool2x2");
    const size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    if (h % 2 || w % 2) throw ShapeError("maxpool2x2: spatial dims must be even");
    QuantTensor out({c, h / 2, w / 2}, x.frac_bits);
    for (size_t k = 0; k < c; ++k)
        for (size_t i = 0; i < h / 2; ++i)
            for (size_t j = 0; j < w / 2; ++j)
                out.at(k, i, j) = std::max({x.at(k, 2 * i, 2 * j), x.at(k, 2 * i, 2 * j + 1),
                                            x.at(k, 2 * i + 1, 2 * j), x.at(k, 2 * i + 1, 2 * j + 1)});
    return out;
}

/// Dense layer accumulator Wx + b at scale 2f.
inline QuantTensor fc_acc(const QuantTensor& x, const QuantTensor& w, const QuantTensor& b) {
    if (w.shape.size() != 2 || w.shape[1] != x.size()) throw ShapeError("fc: weight columns != input length");
    if (b.shape.size() != 1 || b.shape[0] != w.shape[0]) throw ShapeError("fc: bias shape mismatch");
    if (x.frac_bits != w.frac_bits || b.frac_bits != 2 * x.frac_bits) throw ShapeError("fc: scale mismatch");
    const size_t rows = w.shape[0], cols = w.shape[1];
    QuantTensor acc({rows}, 2 * x.frac_bits);
    for (size_t r = 0; r < rows; ++r) {
        int64_t s = b.data[r];
        for (size_t k = 0; k < cols; ++k) s += w.data[r * cols + k] * x.data[k];
        acc.data[r] = s;
    }
    return acc;
}

inline QuantTensor fc_q(const QuantTensor& x, const QuantTensor& w, const QuantTensor& b) {
    return rescale(fc_acc(x, w, b), x.frac_bits);
}

// Float counterparts used by the reference forward pass. Summation order is
// fixed (bias first, then input channel, kernel row, kernel column).

inline Tensor conv2d_f(const Tensor& x, const Tensor& w, const Tensor& b) {
    detail::require_conv_params(x.shape, w.shape, b.shape);
    const size_t cout = w.shape[0], cin = w.shape[1], h = x.shape[1], wd = x.shape[2];
    Tensor out({cout, h, wd});
    for (size_t co = 0; co < cout; ++co)
        for (size_t i = 0; i < h; ++i)
            for (size_t j = 0; j < wd; ++j) {
                double s = b.data[co];
                for (size_t ci = 0; ci < cin; ++ci)
                    for (size_t di = 0; di < 3; ++di) {
                        const long ii = static_cast<long>(i + di) - 1;
                        if (ii < 0 || ii >= static_cast<long>(h)) continue;
                        for (size_t dj = 0; dj < 3; ++dj) {
                            const long jj = static_cast<long>(j + dj) - 1;
                            if (jj < 0 || jj >= static_cast<long>(wd)) continue;
                            s += w.data[((co * cin + ci) * 3 + di) * 3 + dj] * x.at(ci, ii, jj);
                        }
                    }
                out.at(co, i, j) = s;
            }
    return out;
}

inline Tensor leaky_relu_f(Tensor x, int slope_shift) {
    const double slope = std::ldexp(1.0, -slope_shift);
    for (auto& v : x.data)
        if (v < 0) v *= slope;
    return x;
}

inline Tensor maxpool2x2_f(const Tensor& x) {
    detail::require_chw(x.shape, "maxpool2x2");
    const size_t c = x.shape[0], h = x.shape[1], w = x.shape[2];
    if (h % 2 || w % 2) throw ShapeError("maxpool2x2: spatial dims must be even");
    Tensor out({c, h / 2, w / 2});
    for (size_t k = 0; k < c; ++k)
        for (size_t i = 0; i < h / 2; ++i)
            for (size_t j = 0; j < w / 2; ++j)
                out.at(k, i, j) = std::max({x.at(k, 2 * i, 2 * j), x.at(k, 2 * i, 2 * j + 1),
                                            x.at(k, 2 * i + 1, 2 * j), x.at(k, 2 * i + 1, 2 * j + 1)});
    return out;
}

inline Tensor fc_f(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.shape.size() != 2 || w.shape[1] != x.size()) throw ShapeError("fc: weight columns != input length");
    if (b.shape.size() != 1 || b.shape[0] != w.shape[0]) throw ShapeError("fc: bias shape mismatch");
    const size_t rows = w.shape[0], cols = w.shape[1];
    Tensor out({rows});
    for (size_t r = 0; r < rows; ++r) {
        double s = b.data[r];
        for (size_t k = 0; k < cols; ++k) s += w.data[r * cols + k] * x.data[k];
        out.data[r] = s;
    }
    return out;
}

} // namespace tdx
