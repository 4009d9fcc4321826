#pragma once

// Static magnitude analysis. Every bound M is inclusive (|v| <= M) and the
// matching bit width W is the least W with M < 2^W, so a sign gadget that
// decomposes v + 2^W into W+1 bits accepts every reachable value. Activation
// gadgets also need W >= slope_shift so the negative branch can be read off
// the high bits.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <string>

#include "tdx/errors.hpp"
#include "tdx/model.hpp"

namespace tdx {

/// Accumulators at or above this magnitude could alias in the field.
inline constexpr int64_t kAccumulatorLimit = int64_t{1} << 62;

struct BlockBounds {
    int64_t input = 0;  // activation entering the block
    int64_t acc = 0;    // conv accumulator at 2f
    int64_t quot = 0;   // rescaled conv output (sign-gadget input)
    int quot_bits = 0;  // W for the activation sign gadget
    int64_t act = 0;    // LeakyReLU output
    int cmp_bits = 0;   // W for the pooling comparison a - b
    int64_t pooled = 0;
};

struct Bounds {
    int64_t pixel = 0;
    int pixel_bits = 0; // pixels are range-checked as unsigned values < 2^pixel_bits
    std::array<BlockBounds, kNumBlocks> blocks{};
    int64_t fc1_acc = 0, fc1_quot = 0, fc1_act = 0;
    int fc1_quot_bits = 0;
    int64_t fc2_acc = 0;
    int fc2_bits = 0; // W for the verdict sign gadget
};

inline int bits_for(int64_t m) { return static_cast<int>(std::bit_width(static_cast<uint64_t>(m))); }

namespace detail {

inline int64_t checked_bound(__int128 v, const char* what) {
    if (v >= kAccumulatorLimit) throw BoundOverflow(std::string("bound analysis: ") + what + " may reach 2^62");
    return static_cast<int64_t>(v);
}

/// max over output rows of sum|w_row| * in + |b_row|
inline int64_t linear_bound(const QuantTensor& w, const QuantTensor& b, int64_t in, const char* what) {
    const size_t rows = b.size(), per = w.size() / rows;
    __int128 best = 0;
    for (size_t r = 0; r < rows; ++r) {
        __int128 s = b.data[r] < 0 ? -static_cast<__int128>(b.data[r]) : b.data[r];
        for (size_t k = 0; k < per; ++k) {
            const int64_t v = w.data[r * per + k];
            s += static_cast<__int128>(v < 0 ? -v : v) * in;
        }
        best = std::max(best, s);
    }
    return checked_bound(best, what);
}

inline int64_t rescaled(int64_t acc, int f) { return (acc + (int64_t{1} << f) - 1) >> f; }

} // namespace detail

inline Bounds bound_analysis(const ModelSpec& spec, const Weights& w) {
    const int f = static_cast<int>(spec.frac_bits);
    Bounds out;
    out.pixel = int64_t{1} << f;
    out.pixel_bits = bits_for(out.pixel);
    int64_t in = out.pixel;
    for (size_t b = 0; b < kNumBlocks; ++b) {
        auto& bb = out.blocks[b];
        bb.input = in;
        bb.acc = detail::linear_bound(w.conv[b].weight, w.conv[b].bias, in, "conv accumulator");
        bb.quot = detail::rescaled(bb.acc, f);
        bb.quot_bits = std::max(bits_for(bb.quot), static_cast<int>(spec.slope_shift));
        bb.act = bb.quot;
        bb.cmp_bits = bits_for(detail::checked_bound(static_cast<__int128>(2) * bb.act, "pool difference"));
        bb.pooled = bb.act;
        in = bb.pooled;
    }
    out.fc1_acc = detail::linear_bound(w.fc1_w, w.fc1_b, in, "fc1 accumulator");
    out.fc1_quot = detail::rescaled(out.fc1_acc, f);
    out.fc1_quot_bits = std::max(bits_for(out.fc1_quot), static_cast<int>(spec.slope_shift));
    out.fc1_act = out.fc1_quot;
    out.fc2_acc = detail::linear_bound(w.fc2_w, w.fc2_b, out.fc1_act, "fc2 accumulator");
    out.fc2_bits = bits_for(out.fc2_acc);
    return out;
}

} // namespace tdx
