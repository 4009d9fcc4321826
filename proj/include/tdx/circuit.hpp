#pragma once

// Compiles the fixed-point detector into a constant-depth layered circuit.
//
// Layer 0 holds the frame and the prover's advice (quotients, remainder bits,
// sign bits, comparison bits). All four blocks are checked in parallel:
//
//   L1  activations from advice, booleanity and decomposition checks,
//       block-0 rescale check, partial sums for the later checks
//   L2  first pooling level (horizontal pairs)
//   L3  second pooling level (vertical pairs)
//   L4  conv/FC rescale checks for the remaining blocks, verdict sign check
//
// The output layer is [verdict | constraint wires]; an honest evaluation
// leaves every wire but the verdict at zero. Constraint wires are carried
// forward from the layer where they are computed.

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "tdx/bounds.hpp"
#include "tdx/hash.hpp"
#include "tdx/inference.hpp"
#include "tdx/model.hpp"
#include "tdx/wiring.hpp"

namespace tdx {

inline constexpr size_t kCircuitDepth = 5;

struct LayeredCircuit {
    Model model;
    Bounds bounds;
    std::vector<StructuredLayer> layers; // layers[0] is the input layer (no terms)

    const LayerLayout& input() const { return layers.front().layout; }
    const LayerLayout& output() const { return layers.back().layout; }
    size_t depth() const { return layers.size(); }
};

struct Witness {
    std::vector<std::vector<Fp>> layers;
    uint64_t blind_seed = 0;

    const std::vector<Fp>& outputs() const { return layers.back(); }
};

using Advice = std::vector<Fp>;

namespace detail {

class CircuitBuilder {
public:
    explicit CircuitBuilder(size_t depth) : layers_(depth) {}

    uint32_t region(size_t layer, std::string name, std::vector<uint32_t> extents, int bound_bits = 0) {
        Region r;
        r.name = std::move(name);
        for (uint32_t e : extents) r.axes.push_back(Axis::of(e));
        r.bound_bits = bound_bits;
        auto& regs = layers_[layer].layout.regions;
        regs.push_back(std::move(r));
        return static_cast<uint32_t>(regs.size() - 1);
    }
    const Region& get(size_t layer, uint32_t idx) const { return layers_[layer].layout.regions[idx]; }
    void term(size_t layer, Term t) { layers_[layer].terms.push_back(std::move(t)); }

    /// Copies a region into the next layer unchanged.
    uint32_t forward(size_t layer, uint32_t idx) {
        const Region src = get(layer, idx);
        std::vector<uint32_t> ext;
        for (const auto& a : src.axes) ext.push_back(a.extent);
        const uint32_t dst = region(layer + 1, src.name, ext, src.bound_bits);
        term(layer + 1, {TermKind::Linear, 1, dst, idx, 0, same(ext.size()), {}, {}});
        return dst;
    }

    std::vector<StructuredLayer> finish() && { return std::move(layers_); }

    static std::vector<AxisMap> same(size_t n) {
        std::vector<AxisMap> m;
        for (size_t k = 0; k < n; ++k) m.push_back(AxisMap::same(static_cast<uint8_t>(k)));
        return m;
    }
    /// Same on the leading n axes plus one trailing bit axis.
    static std::vector<AxisMap> with_bit(size_t n, AxisMap bit) {
        auto m = same(n);
        m.push_back(bit);
        return m;
    }

private:
    std::vector<StructuredLayer> layers_;
};

inline std::vector<int64_t> powers(size_t n, int skip = 0) {
    std::vector<int64_t> v(n, 0);
    for (size_t k = static_cast<size_t>(skip); k < n; ++k) v[k] = int64_t{1} << (k - skip);
    return v;
}

/// out += coef * sum_k weights[k] * bits[..., k]
inline Term bit_sum(uint32_t out, uint32_t bits, size_t lead, std::vector<int64_t> weights, int64_t coef) {
    Term t{TermKind::Linear, coef, out, bits, 0, CircuitBuilder::with_bit(lead, AxisMap::table()), {}, {}};
    t.table.dims = {{Role::In1, static_cast<uint8_t>(lead)}};
    t.table.values = std::move(weights);
    return t;
}

/// y = leaky(q) from the sign decomposition d of q + 2^W (W+1 bits):
///   pos = d_W, neg = sum_{k>=s} 2^{k-s} d_k - 2^{W-s} = floor(q / 2^s) when q < 0
///   y = neg + pos * q - pos * neg
inline void leaky_terms(CircuitBuilder& b, size_t layer, uint32_t out, uint32_t q, uint32_t d, size_t lead, int W, int s) {
    const auto t = powers(static_cast<size_t>(W) + 1, s);
    const int64_t off = int64_t{1} << (W - s);
    const auto top = AxisMap::fixed(static_cast<uint32_t>(W));
    b.term(layer, bit_sum(out, d, lead, t, 1));
    b.term(layer, {TermKind::Const, -off, out, 0, 0, {}, {}, {}});
    b.term(layer, {TermKind::Mul, 1, out, d, q, CircuitBuilder::with_bit(lead, top), CircuitBuilder::same(lead), {}});
    Term pn{TermKind::Mul, -1, out, d, d, CircuitBuilder::with_bit(lead, top), CircuitBuilder::with_bit(lead, AxisMap::table()), {}};
    pn.table.dims = {{Role::In2, static_cast<uint8_t>(lead)}};
    pn.table.values = t;
    b.term(layer, pn);
    b.term(layer, {TermKind::Linear, off, out, d, 0, CircuitBuilder::with_bit(lead, top), {}, {}});
}

/// Booleanity: out = x^2 - x over every element of a region.
inline void bool_terms(CircuitBuilder& b, size_t layer, uint32_t out, uint32_t x, size_t rank) {
    b.term(layer, {TermKind::Mul, 1, out, x, x, CircuitBuilder::same(rank), CircuitBuilder::same(rank), {}});
    b.term(layer, {TermKind::Linear, -1, out, x, 0, CircuitBuilder::same(rank), {}, {}});
}

/// out += conv3x3(in) + bias
inline void conv_terms(CircuitBuilder& b, size_t layer, uint32_t out, uint32_t in, const ConvParams& p) {
    const size_t co = p.weight.shape[0], ci = p.weight.shape[1];
    for (int di = 0; di < 3; ++di)
        for (int dj = 0; dj < 3; ++dj) {
            Term t{TermKind::Linear, 1, out, in, 0,
                   {AxisMap::table(), AxisMap::affine(1, 1, di - 1), AxisMap::affine(2, 1, dj - 1)}, {}, {}};
            t.table.dims = {{Role::Out, 0}, {Role::In1, 0}};
            for (size_t o = 0; o < co; ++o)
                for (size_t i = 0; i < ci; ++i) t.table.values.push_back(p.weight.data[((o * ci + i) * 3 + di) * 3 + dj]);
            b.term(layer, std::move(t));
        }
    Term bias{TermKind::Const, 1, out, 0, 0, {}, {}, {}};
    bias.table.dims = {{Role::Out, 0}};
    bias.table.values = p.bias.data;
    b.term(layer, std::move(bias));
}

/// Pool step along `axis` (1 = rows, 2 = columns):
///   out = src[2j+1] + e * (src[2j] - src[2j+1]),  cmp = src[2j] - src[2j+1] + part
inline void pool_terms(CircuitBuilder& b, size_t layer, uint32_t out, uint32_t cmp, uint32_t src, uint32_t etop, uint32_t part,
                       int axis) {
    auto at = [axis](int a) {
        auto m = CircuitBuilder::same(3);
        m[axis] = AxisMap::affine(static_cast<uint8_t>(axis), 2, a);
        return m;
    };
    b.term(layer, {TermKind::Linear, 1, out, src, 0, at(1), {}, {}});
    b.term(layer, {TermKind::Mul, 1, out, etop, src, CircuitBuilder::same(3), at(0), {}});
    b.term(layer, {TermKind::Mul, -1, out, etop, src, CircuitBuilder::same(3), at(1), {}});
    b.term(layer, {TermKind::Linear, 1, cmp, src, 0, at(0), {}, {}});
    b.term(layer, {TermKind::Linear, -1, cmp, src, 0, at(1), {}, {}});
    b.term(layer, {TermKind::Linear, 1, cmp, part, 0, CircuitBuilder::same(3), {}, {}});
}

} // namespace detail

/// Names of the advice regions, in advice-vector order.
inline std::vector<std::string> advice_regions(const LayeredCircuit& c) {
    std::vector<std::string> out;
    for (const auto& r : c.input().regions)
        if (r.name != "frame") out.push_back(r.name);
    return out;
}

inline void validate_circuit(const LayeredCircuit& c) {
    if (c.layers.size() != kCircuitDepth) throw LayoutError("circuit: unexpected depth");
    if (!c.layers[0].terms.empty()) throw LayoutError("circuit: input layer has gates");
    for (size_t i = 0; i < c.layers.size(); ++i) {
        const auto& l = c.layers[i].layout;
        for (size_t a = 0; a < l.regions.size(); ++a) {
            const auto& r = l.regions[a];
            if (r.offset % r.padded_size() || r.offset + r.padded_size() > l.width())
                throw LayoutError("circuit: misaligned region " + r.name);
            for (size_t b = a + 1; b < l.regions.size(); ++b) {
                const auto& s = l.regions[b];
                if (r.offset < s.offset + s.padded_size() && s.offset < r.offset + r.padded_size())
                    throw LayoutError("circuit: overlapping regions " + r.name + ", " + s.name);
            }
        }
        if (i > 0)
            for (const auto& t : c.layers[i].terms) validate_term(t, l, &c.layers[i - 1].layout);
    }
    const auto& out = c.output();
    const auto& v = out.region("verdict");
    if (v.offset != 0 || v.real_size() != 1) throw LayoutError("circuit: verdict must be output wire 0");
    c.input().region("frame");
}

inline LayeredCircuit compile(const ModelSpec& spec, const Weights& w) {
    using detail::CircuitBuilder;
    spec.validate();
    validate_weights(spec, w);
    const Bounds bd = bound_analysis(spec, w);
    const int f = static_cast<int>(spec.frac_bits), s = static_cast<int>(spec.slope_shift);

    CircuitBuilder b(kCircuitDepth);
    const uint32_t C = spec.channels, H = spec.height, W = spec.width;
    const uint32_t hidden = spec.hidden;
    const auto ub = [](int v) { return static_cast<uint32_t>(v); };

    // ---- layer 0: frame and advice
    struct BlockIn {
        uint32_t q, r, d, e1, e2;
        uint32_t ch, h, w;
        int qb, cb;
    };
    const uint32_t frame = b.region(0, "frame", {C, H, W}, bd.pixel_bits);
    const uint32_t frame_bits = b.region(0, "frame_bits", {C, H, W, ub(bd.pixel_bits)});
    std::array<BlockIn, kNumBlocks> in{};
    for (size_t k = 0; k < kNumBlocks; ++k) {
        auto& x = in[k];
        const auto n = std::to_string(k);
        x.ch = spec.blocks[k].out_ch;
        x.h = spec.block_height(k);
        x.w = spec.block_width(k);
        x.qb = bd.blocks[k].quot_bits;
        x.cb = bd.blocks[k].cmp_bits;
        x.q = b.region(0, "q" + n, {x.ch, x.h, x.w}, x.qb);
        x.r = b.region(0, "r" + n, {x.ch, x.h, x.w, ub(f)});
        x.d = b.region(0, "d" + n, {x.ch, x.h, x.w, ub(x.qb + 1)});
        x.e1 = b.region(0, "e1_" + n, {x.ch, x.h, x.w / 2, ub(x.cb + 1)});
        x.e2 = b.region(0, "e2_" + n, {x.ch, x.h / 2, x.w / 2, ub(x.cb + 1)});
    }
    const int hb = bd.fc1_quot_bits, vb = bd.fc2_bits;
    const uint32_t qh = b.region(0, "qh", {hidden}, hb);
    const uint32_t rh = b.region(0, "rh", {hidden, ub(f)});
    const uint32_t dh = b.region(0, "dh", {hidden, ub(hb + 1)});
    const uint32_t vbits = b.region(0, "v", {ub(vb + 1)});

    // ---- layer 1
    std::vector<uint32_t> cons; // constraint regions in the current layer
    auto bool_check = [&](uint32_t x) {
        const Region r = b.get(0, x);
        std::vector<uint32_t> ext;
        for (const auto& a : r.axes) ext.push_back(a.extent);
        const uint32_t o = b.region(1, "bool_" + r.name, ext);
        detail::bool_terms(b, 1, o, x, ext.size());
        cons.push_back(o);
    };
    bool_check(frame_bits);
    for (const auto& x : in)
        for (uint32_t r : {x.r, x.d, x.e1, x.e2}) bool_check(r);
    for (uint32_t r : {rh, dh, vbits}) bool_check(r);

    {
        const uint32_t o = b.region(1, "dec_frame", {C, H, W});
        b.term(1, {TermKind::Linear, 1, o, frame, 0, CircuitBuilder::same(3), {}, {}});
        b.term(1, detail::bit_sum(o, frame_bits, 3, detail::powers(bd.pixel_bits), -1));
        cons.push_back(o);
    }

    struct BlockL1 {
        uint32_t y, rpart, etop1, epart1, etop2, epart2;
    };
    std::array<BlockL1, kNumBlocks> l1{};
    for (size_t k = 0; k < kNumBlocks; ++k) {
        const auto& x = in[k];
        auto& o = l1[k];
        const auto n = std::to_string(k);
        o.y = b.region(1, "y" + n, {x.ch, x.h, x.w}, x.qb);
        detail::leaky_terms(b, 1, o.y, x.q, x.d, 3, x.qb, s);

        const uint32_t dec = b.region(1, "dec_d" + n, {x.ch, x.h, x.w});
        b.term(1, {TermKind::Linear, 1, dec, x.q, 0, CircuitBuilder::same(3), {}, {}});
        b.term(1, {TermKind::Const, int64_t{1} << x.qb, dec, 0, 0, {}, {}, {}});
        b.term(1, detail::bit_sum(dec, x.d, 3, detail::powers(ub(x.qb + 1)), -1));
        cons.push_back(dec);

        // rescale: acc - 2^f q - sum 2^k r_k = 0, acc checked here for block 0
        const uint32_t rp = b.region(1, k == 0 ? "res0" : "rpart" + n, {x.ch, x.h, x.w});
        b.term(1, {TermKind::Linear, -(int64_t{1} << f), rp, x.q, 0, CircuitBuilder::same(3), {}, {}});
        b.term(1, detail::bit_sum(rp, x.r, 3, detail::powers(ub(f)), -1));
        if (k == 0) {
            detail::conv_terms(b, 1, rp, frame, w.conv[0]);
            cons.push_back(rp);
        }
        o.rpart = rp;

        auto split = [&](uint32_t e, const std::string& tag, std::vector<uint32_t> ext) {
            const uint32_t top = b.region(1, "etop" + tag + "_" + n, ext);
            b.term(1, {TermKind::Linear, 1, top, e, 0, CircuitBuilder::with_bit(3, AxisMap::fixed(ub(x.cb))), {}, {}});
            const uint32_t part = b.region(1, "epart" + tag + "_" + n, ext);
            b.term(1, {TermKind::Const, int64_t{1} << x.cb, part, 0, 0, {}, {}, {}});
            b.term(1, detail::bit_sum(part, e, 3, detail::powers(ub(x.cb + 1)), -1));
            return std::pair{top, part};
        };
        std::tie(o.etop1, o.epart1) = split(x.e1, "1", {x.ch, x.h, x.w / 2});
        std::tie(o.etop2, o.epart2) = split(x.e2, "2", {x.ch, x.h / 2, x.w / 2});
    }

    const uint32_t yh = b.region(1, "yh", {hidden}, hb);
    detail::leaky_terms(b, 1, yh, qh, dh, 1, hb, s);
    {
        const uint32_t dec = b.region(1, "dec_dh", {hidden});
        b.term(1, {TermKind::Linear, 1, dec, qh, 0, CircuitBuilder::same(1), {}, {}});
        b.term(1, {TermKind::Const, int64_t{1} << hb, dec, 0, 0, {}, {}, {}});
        b.term(1, detail::bit_sum(dec, dh, 1, detail::powers(ub(hb + 1)), -1));
        cons.push_back(dec);
    }
    const uint32_t rparth = b.region(1, "rparth", {hidden});
    b.term(1, {TermKind::Linear, -(int64_t{1} << f), rparth, qh, 0, CircuitBuilder::same(1), {}, {}});
    b.term(1, detail::bit_sum(rparth, rh, 1, detail::powers(ub(f)), -1));

    const uint32_t vpart = b.region(1, "vpart", {1});
    b.term(1, {TermKind::Const, int64_t{1} << vb, vpart, 0, 0, {}, {}, {}});
    b.term(1, detail::bit_sum(vpart, vbits, 0, detail::powers(ub(vb + 1)), -1));
    const uint32_t verdict1 = b.region(1, "verdict", {1});
    b.term(1, {TermKind::Linear, 1, verdict1, vbits, 0, {AxisMap::fixed(ub(vb))}, {}, {}});

    // Values that later layers consume, forwarded one layer at a time.
    std::vector<uint32_t> carry_rpart;
    for (size_t k = 1; k < kNumBlocks; ++k) carry_rpart.push_back(l1[k].rpart);
    uint32_t c_rparth = rparth, c_yh = yh, c_vpart = vpart, c_verdict = verdict1;
    auto forward_all = [&](size_t layer) {
        for (auto& r : cons) r = b.forward(layer, r);
        for (auto& r : carry_rpart) r = b.forward(layer, r);
        c_rparth = b.forward(layer, c_rparth);
        c_yh = b.forward(layer, c_yh);
        c_vpart = b.forward(layer, c_vpart);
        c_verdict = b.forward(layer, c_verdict);
    };

    // ---- layer 2: horizontal max
    std::array<uint32_t, kNumBlocks> m1{}, etop2{}, epart2{};
    std::vector<uint32_t> new_cons;
    for (size_t k = 0; k < kNumBlocks; ++k) {
        const auto& x = in[k];
        const auto n = std::to_string(k);
        m1[k] = b.region(2, "m1_" + n, {x.ch, x.h, x.w / 2}, x.qb);
        const uint32_t cmp = b.region(2, "cmp1_" + n, {x.ch, x.h, x.w / 2});
        detail::pool_terms(b, 2, m1[k], cmp, l1[k].y, l1[k].etop1, l1[k].epart1, 2);
        new_cons.push_back(cmp);
        etop2[k] = b.forward(1, l1[k].etop2);
        epart2[k] = b.forward(1, l1[k].epart2);
    }
    forward_all(1);
    cons.insert(cons.end(), new_cons.begin(), new_cons.end());
    new_cons.clear();

    // ---- layer 3: vertical max
    std::array<uint32_t, kNumBlocks> pooled{};
    for (size_t k = 0; k < kNumBlocks; ++k) {
        const auto& x = in[k];
        const auto n = std::to_string(k);
        pooled[k] = b.region(3, "p" + n, {x.ch, x.h / 2, x.w / 2}, x.qb);
        const uint32_t cmp = b.region(3, "cmp2_" + n, {x.ch, x.h / 2, x.w / 2});
        detail::pool_terms(b, 3, pooled[k], cmp, m1[k], etop2[k], epart2[k], 1);
        new_cons.push_back(cmp);
    }
    forward_all(2);
    cons.insert(cons.end(), new_cons.begin(), new_cons.end());

    // ---- layer 4: output
    const uint32_t out_verdict = b.forward(3, c_verdict);
    (void)out_verdict;
    for (auto& r : cons) r = b.forward(3, r);
    for (size_t k = 1; k < kNumBlocks; ++k) {
        const auto& x = in[k];
        const uint32_t o = b.region(4, "res" + std::to_string(k), {x.ch, x.h, x.w});
        detail::conv_terms(b, 4, o, pooled[k - 1], w.conv[k]);
        b.term(4, {TermKind::Linear, 1, o, carry_rpart[k - 1], 0, CircuitBuilder::same(3), {}, {}});
    }
    {
        const uint32_t o = b.region(4, "resh", {hidden});
        Term t{TermKind::Linear, 1, o, pooled[kNumBlocks - 1], 0, {AxisMap::table(), AxisMap::table(), AxisMap::table()}, {}, {}};
        t.table.dims = {{Role::Out, 0}, {Role::In1, 0}, {Role::In1, 1}, {Role::In1, 2}};
        t.table.values = w.fc1_w.data;
        b.term(4, std::move(t));
        Term bias{TermKind::Const, 1, o, 0, 0, {}, {}, {{{Role::Out, 0}}, w.fc1_b.data}};
        b.term(4, std::move(bias));
        b.term(4, {TermKind::Linear, 1, o, c_rparth, 0, CircuitBuilder::same(1), {}, {}});
    }
    {
        const uint32_t o = b.region(4, "decv", {1});
        Term t{TermKind::Linear, 1, o, c_yh, 0, {AxisMap::table()}, {}, {{{Role::In1, 0}}, w.fc2_w.data}};
        b.term(4, std::move(t));
        b.term(4, {TermKind::Const, w.fc2_b.data[0], o, 0, 0, {}, {}, {}});
        b.term(4, {TermKind::Linear, 1, o, c_vpart, 0, CircuitBuilder::same(1), {}, {}});
    }

    LayeredCircuit c;
    c.model = {spec, w};
    c.bounds = bd;
    c.layers = std::move(b).finish();
    for (size_t i = 0; i + 1 < c.layers.size(); ++i) allocate(c.layers[i].layout);
    allocate(c.layers.back().layout, "verdict");
    validate_circuit(c);
    return c;
}

inline LayeredCircuit compile(const Model& m) { return compile(m.spec, m.weights); }

// ---------------------------------------------------------------------------
// Explicit form, evaluation and advice

inline std::vector<ExplicitLayer> materialize(const LayeredCircuit& c) {
    std::vector<ExplicitLayer> out(c.depth());
    for (size_t i = 1; i < c.depth(); ++i) out[i] = materialize(c.layers[i], c.layers[i - 1].layout);
    return out;
}

namespace detail {

struct InputWriter {
    const LayerLayout& layout;
    std::vector<Fp>& v;

    void set(const Region& r, std::initializer_list<uint32_t> coord, int64_t value) {
        v[r.index(std::vector<uint32_t>(coord))] = Fp::from_signed(value);
    }
    /// Writes the bits of u (0 <= u < 2^n) along the trailing axis of r.
    void bits(const Region& r, std::vector<uint32_t> lead, int64_t u, size_t n, const char* what) {
        if (u < 0 || (n < 63 && u >= (int64_t{1} << n))) throw OverflowError(std::string("advice: ") + what + " out of gadget range");
        lead.push_back(0);
        for (size_t k = 0; k < n; ++k) {
            lead.back() = static_cast<uint32_t>(k);
            v[r.index(lead)] = Fp((static_cast<uint64_t>(u) >> k) & 1);
        }
    }
};

} // namespace detail

/// Full input layer (frame plus advice) for an honest run on `frame`.
inline std::vector<Fp> honest_input(const LayeredCircuit& c, const QuantTensor& frame) {
    const auto& spec = c.model.spec;
    const auto t = infer_quantized(c.model, frame);
    const int f = static_cast<int>(spec.frac_bits);
    const auto& L = c.input();
    std::vector<Fp> v(L.width());
    detail::InputWriter wr{L, v};

    const auto& fr = L.region("frame");
    const auto& fb = L.region("frame_bits");
    for (uint32_t k = 0; k < spec.channels; ++k)
        for (uint32_t i = 0; i < spec.height; ++i)
            for (uint32_t j = 0; j < spec.width; ++j) {
                const int64_t p = frame.at(k, i, j);
                wr.set(fr, {k, i, j}, p);
                wr.bits(fb, {k, i, j}, p, static_cast<size_t>(c.bounds.pixel_bits), "pixel");
            }

    for (size_t b = 0; b < kNumBlocks; ++b) {
        const auto n = std::to_string(b);
        const auto& bt = t.blocks[b];
        const auto& bb = c.bounds.blocks[b];
        const auto& q = L.region("q" + n);
        const auto& r = L.region("r" + n);
        const auto& d = L.region("d" + n);
        const auto& e1 = L.region("e1_" + n);
        const auto& e2 = L.region("e2_" + n);
        const uint32_t ch = spec.blocks[b].out_ch, h = spec.block_height(b), w = spec.block_width(b);
        for (uint32_t k = 0; k < ch; ++k)
            for (uint32_t i = 0; i < h; ++i)
                for (uint32_t j = 0; j < w; ++j) {
                    const int64_t qv = bt.conv.at(k, i, j);
                    wr.set(q, {k, i, j}, qv);
                    wr.bits(r, {k, i, j}, bt.acc.at(k, i, j) - (qv << f), static_cast<size_t>(f), "remainder");
                    wr.bits(d, {k, i, j}, qv + (int64_t{1} << bb.quot_bits), static_cast<size_t>(bb.quot_bits) + 1, "activation sign");
                }
        const int64_t off = int64_t{1} << bb.cmp_bits;
        const size_t nb = static_cast<size_t>(bb.cmp_bits) + 1;
        // Level-1 maxima, computed the way the circuit does (horizontal first).
        QuantTensor m1({ch, h, w / 2}, f);
        for (uint32_t k = 0; k < ch; ++k)
            for (uint32_t i = 0; i < h; ++i)
                for (uint32_t j = 0; j < w / 2; ++j) {
                    const int64_t a = bt.act.at(k, i, 2 * j), c2 = bt.act.at(k, i, 2 * j + 1);
                    wr.bits(e1, {k, i, j}, a - c2 + off, nb, "pool comparison");
                    m1.at(k, i, j) = std::max(a, c2);
                }
        for (uint32_t k = 0; k < ch; ++k)
            for (uint32_t i = 0; i < h / 2; ++i)
                for (uint32_t j = 0; j < w / 2; ++j)
                    wr.bits(e2, {k, i, j}, m1.at(k, 2 * i, j) - m1.at(k, 2 * i + 1, j) + off, nb, "pool comparison");
    }

    const auto& qh = L.region("qh");
    const auto& rh = L.region("rh");
    const auto& dh = L.region("dh");
    for (uint32_t k = 0; k < spec.hidden; ++k) {
        const int64_t qv = t.fc1.data[k];
        wr.set(qh, {k}, qv);
        wr.bits(rh, {k}, t.fc1_acc.data[k] - (qv << f), static_cast<size_t>(f), "remainder");
        wr.bits(dh, {k}, qv + (int64_t{1} << c.bounds.fc1_quot_bits), static_cast<size_t>(c.bounds.fc1_quot_bits) + 1, "activation sign");
    }
    wr.bits(L.region("v"), {}, t.fc2_acc.data[0] + (int64_t{1} << c.bounds.fc2_bits), static_cast<size_t>(c.bounds.fc2_bits) + 1,
            "verdict sign");
    return v;
}

/// Advice vector: the padded contents of every non-frame input region, in region order.
inline Advice extract_advice(const LayeredCircuit& c, const std::vector<Fp>& input) {
    Advice a;
    for (const auto& r : c.input().regions) {
        if (r.name == "frame") continue;
        a.insert(a.end(), input.begin() + static_cast<long>(r.offset), input.begin() + static_cast<long>(r.offset + r.padded_size()));
    }
    return a;
}

inline size_t advice_size(const LayeredCircuit& c) {
    size_t n = 0;
    for (const auto& r : c.input().regions)
        if (r.name != "frame") n += r.padded_size();
    return n;
}

inline Advice advice_gen(const LayeredCircuit& c, const QuantTensor& frame) { return extract_advice(c, honest_input(c, frame)); }

inline std::vector<Fp> assemble_input(const LayeredCircuit& c, const QuantTensor& frame, const Advice& advice) {
    const auto& spec = c.model.spec;
    if (frame.shape != spec.input_shape()) throw ShapeError("evaluate: frame shape " + shape_str(frame.shape));
    if (advice.size() != advice_size(c)) throw LayoutError("evaluate: advice length mismatch");
    const auto& L = c.input();
    std::vector<Fp> v(L.width());
    const auto& fr = L.region("frame");
    for (uint32_t k = 0; k < spec.channels; ++k)
        for (uint32_t i = 0; i < spec.height; ++i)
            for (uint32_t j = 0; j < spec.width; ++j) v[fr.index(std::vector<uint32_t>{k, i, j})] = Fp::from_signed(frame.at(k, i, j));
    size_t pos = 0;
    for (const auto& r : L.regions) {
        if (r.name == "frame") continue;
        std::copy(advice.begin() + static_cast<long>(pos), advice.begin() + static_cast<long>(pos + r.padded_size()),
                  v.begin() + static_cast<long>(r.offset));
        pos += r.padded_size();
    }
    return v;
}

inline std::vector<Fp> eval_layer(const ExplicitLayer& e, size_t width, const std::vector<Fp>& prev) {
    std::vector<Fp> v(width);
    for (const auto& c : e.cst) v[c.out] += c.coef;
    for (const auto& l : e.lin) v[l.out] += l.coef * prev[l.in];
    for (const auto& m : e.mul) v[m.out] += m.coef * prev[m.in1] * prev[m.in2];
    return v;
}

inline Witness evaluate_input(const LayeredCircuit& c, const std::vector<ExplicitLayer>& ex, std::vector<Fp> input) {
    if (input.size() != c.input().width()) throw LayoutError("evaluate: input width mismatch");
    Witness w;
    w.layers.push_back(std::move(input));
    for (size_t i = 1; i < c.depth(); ++i) w.layers.push_back(eval_layer(ex[i], c.layers[i].layout.width(), w.layers.back()));
    return w;
}

inline Witness evaluate(const LayeredCircuit& c, const std::vector<ExplicitLayer>& ex, const QuantTensor& frame, const Advice& advice) {
    return evaluate_input(c, ex, assemble_input(c, frame, advice));
}

inline Witness evaluate(const LayeredCircuit& c, const QuantTensor& frame, const Advice& advice) {
    return evaluate(c, materialize(c), frame, advice);
}

/// Index of the first nonzero constraint wire of the output layer, or -1.
inline long first_violation(const Witness& w) {
    const auto& out = w.outputs();
    for (size_t i = 1; i < out.size(); ++i)
        if (!out[i].is_zero()) return static_cast<long>(i);
    return -1;
}

/// Output verdict; nullopt when the verdict wire is not a bit.
inline std::optional<int> output_verdict(const Witness& w) {
    const Fp v = w.outputs().at(0);
    if (v == Fp::zero()) return 0;
    if (v == Fp::one()) return 1;
    return std::nullopt;
}

/// Name of the output-layer region holding wire `idx`.
inline std::string output_region_of(const LayeredCircuit& c, size_t idx) {
    for (const auto& r : c.output().regions)
        if (idx >= r.offset && idx < r.offset + r.padded_size()) return r.name;
    return "padding";
}

// ---------------------------------------------------------------------------
// Digest and statistics

/// SHA-256 over the canonical explicit gate list (per layer, sorted, merged).
inline Digest circuit_digest(const LayeredCircuit& c, const std::vector<ExplicitLayer>& ex) {
    Sha256 h;
    h.update(std::string_view("tdx/circuit/v1"));
    for (size_t i = 0; i < c.depth(); ++i) {
        h.update_u64(c.layers[i].layout.bits);
        if (i == 0) continue;
        auto lin = ex[i].lin;
        auto mul = ex[i].mul;
        auto cst = ex[i].cst;
        for (auto& m : mul)
            if (m.in1 > m.in2) std::swap(m.in1, m.in2);
        std::sort(lin.begin(), lin.end(), [](auto& a, auto& b) { return std::tie(a.out, a.in) < std::tie(b.out, b.in); });
        std::sort(mul.begin(), mul.end(), [](auto& a, auto& b) { return std::tie(a.out, a.in1, a.in2) < std::tie(b.out, b.in1, b.in2); });
        std::sort(cst.begin(), cst.end(), [](auto& a, auto& b) { return a.out < b.out; });
        ByteWriter w;
        auto emit = [&](uint8_t kind, uint32_t o, uint32_t a, uint32_t b, Fp coef) {
            if (coef.is_zero()) return;
            w.u8(kind);
            w.u32(o);
            w.u32(a);
            w.u32(b);
            w.fp(coef);
        };
        for (size_t k = 0; k < cst.size();) {
            Fp s = Fp::zero();
            size_t j = k;
            for (; j < cst.size() && cst[j].out == cst[k].out; ++j) s += cst[j].coef;
            emit(0, cst[k].out, 0, 0, s);
            k = j;
        }
        for (size_t k = 0; k < lin.size();) {
            Fp s = Fp::zero();
            size_t j = k;
            for (; j < lin.size() && lin[j].out == lin[k].out && lin[j].in == lin[k].in; ++j) s += lin[j].coef;
            emit(1, lin[k].out, lin[k].in, 0, s);
            k = j;
        }
        for (size_t k = 0; k < mul.size();) {
            Fp s = Fp::zero();
            size_t j = k;
            for (; j < mul.size() && mul[j].out == mul[k].out && mul[j].in1 == mul[k].in1 && mul[j].in2 == mul[k].in2; ++j)
                s += mul[j].coef;
            emit(2, mul[k].out, mul[k].in1, mul[k].in2, s);
            k = j;
        }
        const auto bytes = std::move(w).take();
        h.update_u64(bytes.size());
        h.update(bytes);
    }
    return h.finish();
}

struct CircuitStats {
    size_t depth = 0;
    std::vector<unsigned> layer_bits;
    size_t gates = 0;       // real (unpadded) wires in layers 1..d-1
    size_t constraints = 0; // output wires other than the verdict
    size_t input_wires = 0; // real frame + advice wires
    size_t terms = 0;
};

inline CircuitStats circuit_stats(const LayeredCircuit& c) {
    CircuitStats s;
    s.depth = c.depth();
    for (size_t i = 0; i < c.depth(); ++i) {
        const auto& l = c.layers[i];
        s.layer_bits.push_back(l.layout.bits);
        s.terms += l.terms.size();
        size_t real = 0;
        for (const auto& r : l.layout.regions) real += r.real_size();
        if (i == 0)
            s.input_wires = real;
        else
            s.gates += real;
        if (i + 1 == c.depth()) s.constraints = real - 1;
    }
    return s;
}

/// Human-readable layout listing.
inline std::string dump_layout(const LayeredCircuit& c) {
    std::ostringstream os;
    for (size_t i = 0; i < c.depth(); ++i) {
        const auto& l = c.layers[i];
        os << "layer " << i << ": 2^" << l.layout.bits << " wires, " << l.terms.size() << " terms\n";
        for (const auto& r : l.layout.regions) {
            os << "  " << r.name << " @" << r.offset << " [";
            for (size_t k = 0; k < r.axes.size(); ++k) os << (k ? "," : "") << r.axes[k].extent;
            os << "]";
            if (r.bound_bits) os << " bits=" << r.bound_bits;
            os << "\n";
        }
    }
    return os.str();
}

} // namespace tdx
