#pragma once

// Proving and verification keys.
//
// vk: "TDXV" | u8 version | u8 hash id | u64 field modulus | model digest |
//     circuit digest | u32 rate_log | u32 openings | model geometry |
//     u32 depth | layouts | per layer: u32 n_terms, terms
// pk: "TDXK" | u8 version | blob vk | blob model (.tdxw) |
//     per layer >= 1: u32 n_const, u32 n_lin, u32 n_mul, entries
// The vk digest (SHA-256 of the vk bytes) pins the whole verification context.

#include <vector>

#include "tdx/bytes.hpp"
#include "tdx/circuit.hpp"
#include "tdx/hash.hpp"
#include "tdx/pcs.hpp"

namespace tdx {

inline constexpr uint8_t kKeyVersion = 1;
inline constexpr size_t kMaxTableValues = size_t{1} << 22;

struct VerificationKey {
    Digest model_digest{};
    Digest circuit_digest{};
    PcsParams pcs;
    ModelSpec spec;
    std::vector<StructuredLayer> layers;
    Digest digest{}; // SHA-256 of the serialized key

    PcsShape pcs_shape() const { return tdx::pcs_shape(layers.front().layout.bits, pcs); }
};

struct ProvingKey {
    VerificationKey vk;
    LayeredCircuit circuit;
    std::vector<ExplicitLayer> gates;
};

namespace detail {

inline void write_spec(ByteWriter& w, const ModelSpec& s) {
    w.u32(s.channels);
    w.u32(s.height);
    w.u32(s.width);
    for (const auto& b : s.blocks) {
        w.u32(b.in_ch);
        w.u32(b.out_ch);
    }
    w.u32(s.hidden);
    w.u32(s.frac_bits);
    w.u32(s.slope_shift);
}

inline ModelSpec read_spec(ByteReader& r) {
    ModelSpec s;
    s.channels = r.u32();
    s.height = r.u32();
    s.width = r.u32();
    for (auto& b : s.blocks) {
        b.in_ch = r.u32();
        b.out_ch = r.u32();
    }
    s.hidden = r.u32();
    s.frac_bits = r.u32();
    s.slope_shift = r.u32();
    try {
        s.validate();
    } catch (const ShapeError& e) {
        throw FormatError(std::string("vk: ") + e.what());
    }
    return s;
}

} // namespace detail

inline Bytes serialize_vk(const VerificationKey& vk) {
    ByteWriter w;
    w.tag("TDXV");
    w.u8(kKeyVersion);
    w.u8(kHashIdSha256);
    w.u64(Fp::kModulus);
    w.digest(vk.model_digest);
    w.digest(vk.circuit_digest);
    w.u32(vk.pcs.rate_log);
    w.u32(vk.pcs.openings);
    detail::write_spec(w, vk.spec);
    w.u32(static_cast<uint32_t>(vk.layers.size()));
    for (const auto& l : vk.layers) write_layout(w, l.layout);
    for (const auto& l : vk.layers) {
        w.u32(static_cast<uint32_t>(l.terms.size()));
        for (const auto& t : l.terms) write_term(w, t);
    }
    return std::move(w).take();
}

inline VerificationKey deserialize_vk(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_tag("TDXV", "vk");
    if (r.u8() != kKeyVersion) throw FormatError("vk: unsupported version");
    if (r.u8() != kHashIdSha256) throw FormatError("vk: unsupported hash id");
    if (r.u64() != Fp::kModulus) throw FormatError("vk: field modulus mismatch");
    VerificationKey vk;
    vk.model_digest = r.digest();
    vk.circuit_digest = r.digest();
    vk.pcs.rate_log = r.u32();
    vk.pcs.openings = r.u32();
    try {
        pcs_shape(0, vk.pcs);
    } catch (const LengthError& e) {
        throw FormatError(std::string("vk: ") + e.what());
    }
    vk.spec = detail::read_spec(r);
    const size_t depth = r.u32();
    if (depth != kCircuitDepth) throw FormatError("vk: unexpected circuit depth");
    vk.layers.resize(depth);
    for (auto& l : vk.layers) l.layout = read_layout(r);
    size_t table_total = 0;
    for (size_t i = 0; i < depth; ++i) {
        const size_t n = r.count(1 << 16, 30);
        for (size_t k = 0; k < n; ++k) {
            auto t = read_term(r);
            table_total += t.table.values.size();
            if (table_total > kMaxTableValues) throw FormatError("vk: coefficient tables too large");
            vk.layers[i].terms.push_back(std::move(t));
        }
    }
    r.expect_end("vk");
    if (!vk.layers[0].terms.empty()) throw FormatError("vk: input layer has gates");
    try {
        for (size_t i = 1; i < depth; ++i)
            for (const auto& t : vk.layers[i].terms) validate_term(t, vk.layers[i].layout, &vk.layers[i - 1].layout);
        const auto& v = vk.layers.back().layout.region("verdict");
        if (v.offset != 0 || v.real_size() != 1) throw LayoutError("verdict must be output wire 0");
    } catch (const LayoutError& e) {
        throw FormatError(std::string("vk: ") + e.what());
    }
    vk.digest = sha256(bytes);
    return vk;
}

inline ProvingKey setup(const LayeredCircuit& c, const PcsParams& pcs = {}) {
    validate_circuit(c);
    ProvingKey pk;
    pk.circuit = c;
    pk.gates = materialize(c);
    auto& vk = pk.vk;
    vk.model_digest = model_digest(c.model);
    vk.circuit_digest = circuit_digest(c, pk.gates);
    vk.pcs = pcs;
    vk.spec = c.model.spec;
    vk.layers = c.layers;
    vk.digest = sha256(serialize_vk(vk));
    return pk;
}

inline Bytes serialize_pk(const ProvingKey& pk) {
    ByteWriter w;
    w.tag("TDXK");
    w.u8(kKeyVersion);
    w.blob(serialize_vk(pk.vk));
    w.blob(save_weights(pk.circuit.model.spec, pk.circuit.model.weights));
    for (size_t i = 1; i < pk.gates.size(); ++i) {
        const auto& g = pk.gates[i];
        w.u32(static_cast<uint32_t>(g.cst.size()));
        w.u32(static_cast<uint32_t>(g.lin.size()));
        w.u32(static_cast<uint32_t>(g.mul.size()));
        for (const auto& c : g.cst) {
            w.u32(c.out);
            w.fp(c.coef);
        }
        for (const auto& l : g.lin) {
            w.u32(l.out);
            w.u32(l.in);
            w.fp(l.coef);
        }
        for (const auto& m : g.mul) {
            w.u32(m.out);
            w.u32(m.in1);
            w.u32(m.in2);
            w.fp(m.coef);
        }
    }
    return std::move(w).take();
}

/// Parses a pk and checks it against its embedded vk: the model must compile
/// to the vk's structure and the gate tables must hash to its circuit digest.
inline ProvingKey deserialize_pk(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_tag("TDXK", "pk");
    if (r.u8() != kKeyVersion) throw FormatError("pk: unsupported version");
    const auto vk_bytes = r.blob();
    const auto model_bytes = r.blob();
    ProvingKey pk;
    pk.vk = deserialize_vk(vk_bytes);
    Model model;
    try {
        model = load_weights(model_bytes);
        pk.circuit = compile(model);
    } catch (const ShapeError& e) {
        throw FormatError(std::string("pk: ") + e.what());
    } catch (const BoundOverflow& e) {
        throw FormatError(std::string("pk: ") + e.what());
    }
    if (model_digest(model) != pk.vk.model_digest) throw FormatError("pk: model does not match vk");
    if (serialize_vk(VerificationKey{pk.vk.model_digest, pk.vk.circuit_digest, pk.vk.pcs, model.spec, pk.circuit.layers, {}}) !=
        Bytes(vk_bytes.begin(), vk_bytes.end()))
        throw FormatError("pk: compiled circuit does not match vk");
    pk.gates.resize(pk.vk.layers.size());
    for (size_t i = 1; i < pk.gates.size(); ++i) {
        auto& g = pk.gates[i];
        const uint64_t out_w = pk.vk.layers[i].layout.width(), in_w = pk.vk.layers[i - 1].layout.width();
        const size_t nc = r.count(r.remaining() / 12 + 1, 12), nl = r.count(r.remaining() / 16 + 1, 16), nm = r.count(r.remaining() / 20 + 1, 20);
        auto idx = [&](uint64_t limit) {
            const uint32_t v = r.u32();
            if (v >= limit) throw FormatError("pk: gate index out of range");
            return v;
        };
        for (size_t k = 0; k < nc; ++k) {
            const uint32_t o = idx(out_w);
            g.cst.push_back({o, r.fp()});
        }
        for (size_t k = 0; k < nl; ++k) {
            const uint32_t o = idx(out_w), a = idx(in_w);
            g.lin.push_back({o, a, r.fp()});
        }
        for (size_t k = 0; k < nm; ++k) {
            const uint32_t o = idx(out_w), a = idx(in_w), b = idx(in_w);
            g.mul.push_back({o, a, b, r.fp()});
        }
    }
    r.expect_end("pk");
    if (circuit_digest(pk.circuit, pk.gates) != pk.vk.circuit_digest) throw FormatError("pk: gate tables do not match circuit digest");
    return pk;
}

} // namespace tdx
