#pragma once

// Detector architecture, folded integer weights, the .tdxw container,
// batch-norm folding, deterministic synthetic weights and the model digest.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tdx/bytes.hpp"
#include "tdx/errors.hpp"
#include "tdx/fxtensor.hpp"
#include "tdx/hash.hpp"

namespace tdx {

inline constexpr size_t kNumBlocks = 4;

struct BlockSpec {
    uint32_t in_ch = 0;
    uint32_t out_ch = 0;
    friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

/// Four conv(3x3) -> LeakyReLU -> maxpool(2x2) blocks, flatten, FC(hidden) ->
/// LeakyReLU -> FC(1). Dropout is the identity at inference and has no weights.
struct ModelSpec {
    uint32_t channels = 3;
    uint32_t height = 224;
    uint32_t width = 224;
    std::array<BlockSpec, kNumBlocks> blocks{};
    uint32_t hidden = 70;
    uint32_t frac_bits = 8;
    uint32_t slope_shift = 6; // negative slope 2^-6

    static ModelSpec make(uint32_t c, uint32_t h, uint32_t w, std::array<uint32_t, kNumBlocks> out_ch, uint32_t hidden) {
        ModelSpec s;
        s.channels = c;
        s.height = h;
        s.width = w;
        uint32_t in = c;
        for (size_t b = 0; b < kNumBlocks; ++b) {
            s.blocks[b] = {in, out_ch[b]};
            in = out_ch[b];
        }
        s.hidden = hidden;
        return s;
    }
    static ModelSpec full() { return make(3, 224, 224, {16, 32, 64, 128}, 70); }
    /// 16x16x3 test geometry; side may be scaled (e.g. 32) for growth measurements.
    static ModelSpec toy(uint32_t side = 16) { return make(3, side, side, {4, 8, 8, 8}, 16); }

    Shape input_shape() const { return {channels, height, width}; }
    /// Spatial side lengths entering block b.
    uint32_t block_height(size_t b) const { return height >> b; }
    uint32_t block_width(size_t b) const { return width >> b; }
    size_t flat_size() const { return size_t{blocks[kNumBlocks - 1].out_ch} * (height >> kNumBlocks) * (width >> kNumBlocks); }

    /// Throws ShapeError when the architecture is inconsistent.
    void validate() const {
        if (channels == 0 || height == 0 || width == 0) throw ShapeError("model: empty input dims");
        if (height % 16 || width % 16) throw ShapeError("model: height and width must be divisible by 16");
        if (channels > 64 || height > 4096 || width > 4096) throw ShapeError("model: input dims too large");
        uint32_t in = channels;
        for (const auto& b : blocks) {
            if (b.in_ch != in) throw ShapeError("model: block channel chain is inconsistent");
            if (b.out_ch == 0 || b.out_ch > 1024) throw ShapeError("model: block channel count out of range");
            in = b.out_ch;
        }
        if (hidden == 0 || hidden > 4096) throw ShapeError("model: hidden neuron count out of range");
        if (frac_bits < 4 || frac_bits > 16) throw ShapeError("model: frac bits must be in [4, 16]");
        if (slope_shift < 1 || slope_shift > 16) throw ShapeError("model: slope shift must be in [1, 16]");
    }

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ConvParams {
    QuantTensor weight; // (out, in, 3, 3) at f
    QuantTensor bias;   // (out) at 2f
    friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

/// Folded, quantized parameters.
struct Weights {
    std::array<ConvParams, kNumBlocks> conv;
    QuantTensor fc1_w, fc1_b; // (hidden, flat), (hidden)
    QuantTensor fc2_w, fc2_b; // (1, hidden), (1)
    friend bool operator==(const Weights&, const Weights&) = default;
};

struct FloatConv {
    Tensor weight, bias;
};

struct FloatWeights {
    std::array<FloatConv, kNumBlocks> conv;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;
};

inline FloatWeights dequantize_weights(const Weights& w) {
    FloatWeights out;
    for (size_t b = 0; b < kNumBlocks; ++b) out.conv[b] = {dequantize(w.conv[b].weight), dequantize(w.conv[b].bias)};
    out.fc1_w = dequantize(w.fc1_w);
    out.fc1_b = dequantize(w.fc1_b);
    out.fc2_w = dequantize(w.fc2_w);
    out.fc2_b = dequantize(w.fc2_b);
    return out;
}

inline Weights quantize_weights(const FloatWeights& fw, int f) {
    // Biases live at 2f, which can exceed quantize()'s [4, 16] window.
    auto q2 = [f](const Tensor& t) {
        QuantTensor q(t.shape, 2 * f);
        for (size_t i = 0; i < t.size(); ++i) {
            const double r = std::round(std::ldexp(t.data[i], 2 * f));
            if (!std::isfinite(r) || std::fabs(r) >= 2147483648.0) throw OverflowError("quantize: bias magnitude >= 2^31");
            q.data[i] = static_cast<int64_t>(r);
        }
        return q;
    };
    Weights w;
    for (size_t b = 0; b < kNumBlocks; ++b) w.conv[b] = {quantize(fw.conv[b].weight, f), q2(fw.conv[b].bias)};
    w.fc1_w = quantize(fw.fc1_w, f);
    w.fc1_b = q2(fw.fc1_b);
    w.fc2_w = quantize(fw.fc2_w, f);
    w.fc2_b = q2(fw.fc2_b);
    return w;
}

// ---------------------------------------------------------------------------
// Batch-norm folding

struct BatchNormParams {
    std::vector<double> gamma, beta, mean, var;
    double eps = 1e-5;
};

/// Folds y = BN(conv(x)) into conv'(x):
///   w'_c = w_c * g_c / sqrt(var_c + eps),  b'_c = beta_c + (b_c - mean_c) * g_c / sqrt(var_c + eps)
inline std::pair<Tensor, Tensor> fold_batchnorm(const Tensor& conv_w, const Tensor& conv_b, const BatchNormParams& bn) {
    const size_t cout = conv_w.shape.at(0);
    if (conv_b.size() != cout || bn.gamma.size() != cout || bn.beta.size() != cout || bn.mean.size() != cout ||
        bn.var.size() != cout)
        throw ShapeError("fold_batchnorm: per-channel parameter count mismatch");
    Tensor w = conv_w, b = conv_b;
    const size_t per = conv_w.size() / cout;
    for (size_t c = 0; c < cout; ++c) {
        const double denom = bn.var[c] + bn.eps;
        if (!(denom > 0)) throw DegenerateChannel("fold_batchnorm: var + eps <= 0 on channel " + std::to_string(c));
        const double scale = bn.gamma[c] / std::sqrt(denom);
        for (size_t k = 0; k < per; ++k) w.data[c * per + k] *= scale;
        b.data[c] = bn.beta[c] + (conv_b.data[c] - bn.mean[c]) * scale;
    }
    return {w, b};
}

/// Per-channel batch-norm applied to a (C,H,W) activation.
inline Tensor batchnorm_f(Tensor x, const BatchNormParams& bn) {
    const size_t c = x.shape.at(0), per = x.size() / c;
    for (size_t k = 0; k < c; ++k) {
        const double scale = bn.gamma[k] / std::sqrt(bn.var[k] + bn.eps);
        for (size_t i = 0; i < per; ++i) x.data[k * per + i] = (x.data[k * per + i] - bn.mean[k]) * scale + bn.beta[k];
    }
    return x;
}

// ---------------------------------------------------------------------------
// .tdxw container
//
//   "TDXW" | u8 version=1 | u32 C,H,W | u32 n_blocks | n_blocks x (u32 in, u32 out)
//   | u32 hidden | u32 frac_bits | u32 slope_shift
//   | i32 tensors in declaration order: conv[b].weight, conv[b].bias (b=0..3),
//     fc1_w, fc1_b, fc2_w, fc2_b
// All integers little-endian.

inline constexpr uint8_t kWeightsVersion = 1;
inline constexpr int64_t kWeightMagnitudeLimit = int64_t{1} << 24;

namespace detail {

inline Shape conv_weight_shape(const BlockSpec& b) { return {b.out_ch, b.in_ch, 3, 3}; }

inline void write_tensor(ByteWriter& w, const QuantTensor& t) {
    for (int64_t v : t.data) w.i32(static_cast<int32_t>(v));
}

inline QuantTensor read_tensor(ByteReader& r, Shape shape, int frac) {
    const size_t n = shape_size(shape);
    if (n * 4 > r.remaining()) throw FormatError("tdxw: truncated tensor data");
    QuantTensor t(std::move(shape), frac);
    for (size_t i = 0; i < n; ++i) {
        const int64_t v = r.i32();
        if (v >= kWeightMagnitudeLimit || v <= -kWeightMagnitudeLimit) throw FormatError("tdxw: weight magnitude >= 2^24");
        t.data[i] = v;
    }
    return t;
}

} // namespace detail

/// Checks that every tensor in `w` has the shape and scale `spec` demands.
inline void validate_weights(const ModelSpec& spec, const Weights& w) {
    const int f = static_cast<int>(spec.frac_bits);
    auto check = [](const QuantTensor& t, const Shape& s, int frac, const char* what) {
        if (t.shape != s || t.frac_bits != frac || t.data.size() != shape_size(s))
            throw ShapeError(std::string("weights: bad ") + what);
        if (t.max_abs() >= kWeightMagnitudeLimit) throw ShapeError(std::string("weights: magnitude >= 2^24 in ") + what);
    };
    for (size_t b = 0; b < kNumBlocks; ++b) {
        check(w.conv[b].weight, detail::conv_weight_shape(spec.blocks[b]), f, "conv weight");
        check(w.conv[b].bias, {spec.blocks[b].out_ch}, 2 * f, "conv bias");
    }
    check(w.fc1_w, {spec.hidden, spec.flat_size()}, f, "fc1 weight");
    check(w.fc1_b, {spec.hidden}, 2 * f, "fc1 bias");
    check(w.fc2_w, {1, spec.hidden}, f, "fc2 weight");
    check(w.fc2_b, {1}, 2 * f, "fc2 bias");
}

inline Bytes save_weights(const ModelSpec& spec, const Weights& w) {
    spec.validate();
    validate_weights(spec, w);
    ByteWriter out;
    out.tag("TDXW");
    out.u8(kWeightsVersion);
    out.u32(spec.channels);
    out.u32(spec.height);
    out.u32(spec.width);
    out.u32(kNumBlocks);
    for (const auto& b : spec.blocks) {
        out.u32(b.in_ch);
        out.u32(b.out_ch);
    }
    out.u32(spec.hidden);
    out.u32(spec.frac_bits);
    out.u32(spec.slope_shift);
    for (const auto& c : w.conv) {
        detail::write_tensor(out, c.weight);
        detail::write_tensor(out, c.bias);
    }
    detail::write_tensor(out, w.fc1_w);
    detail::write_tensor(out, w.fc1_b);
    detail::write_tensor(out, w.fc2_w);
    detail::write_tensor(out, w.fc2_b);
    return std::move(out).take();
}

struct Model {
    ModelSpec spec;
    Weights weights;
    friend bool operator==(const Model&, const Model&) = default;
};

inline Model load_weights(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_tag("TDXW", "tdxw");
    if (r.u8() != kWeightsVersion) throw FormatError("tdxw: unsupported version");
    Model m;
    auto& s = m.spec;
    s.channels = r.u32();
    s.height = r.u32();
    s.width = r.u32();
    const uint32_t n_blocks = r.u32();
    if (n_blocks != kNumBlocks) {
        // Still require the block table to be present before judging the shape.
        if (n_blocks > 64) throw FormatError("tdxw: block count field out of range");
        r.bytes(size_t{n_blocks} * 8);
        throw ShapeError("tdxw: model must have exactly 4 blocks, found " + std::to_string(n_blocks));
    }
    for (auto& b : s.blocks) {
        b.in_ch = r.u32();
        b.out_ch = r.u32();
    }
    s.hidden = r.u32();
    s.frac_bits = r.u32();
    s.slope_shift = r.u32();
    s.validate();
    const int f = static_cast<int>(s.frac_bits);
    for (size_t b = 0; b < kNumBlocks; ++b) {
        m.weights.conv[b].weight = detail::read_tensor(r, detail::conv_weight_shape(s.blocks[b]), f);
        m.weights.conv[b].bias = detail::read_tensor(r, {s.blocks[b].out_ch}, 2 * f);
    }
    m.weights.fc1_w = detail::read_tensor(r, {s.hidden, s.flat_size()}, f);
    m.weights.fc1_b = detail::read_tensor(r, {s.hidden}, 2 * f);
    m.weights.fc2_w = detail::read_tensor(r, {1, s.hidden}, f);
    m.weights.fc2_b = detail::read_tensor(r, {1}, 2 * f);
    r.expect_end("tdxw");
    return m;
}

inline Digest model_digest(const ModelSpec& spec, const Weights& w) { return sha256(save_weights(spec, w)); }
inline Digest model_digest(const Model& m) { return model_digest(m.spec, m.weights); }

} // namespace tdx
