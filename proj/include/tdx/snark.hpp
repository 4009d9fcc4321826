#pragma once

// Proof system: commit to the input layer, run GKR down to one input-layer
// evaluation, and open the commitment there.
//
// statement: "TDXS" | u8 version | model digest | commitment root | u8 verdict
// proof:     "TDXF" | u8 version | u8 hash id | u32 total length |
//            per layer (output first): phase-1 rounds, V(u), phase-2 rounds, V(v) |
//            merge rounds, v* | c_test | c_eval | columns | Merkle paths
// Round polynomials carry exactly 3 Fp2 coefficients. Every count is implied
// by the verification key, so a proof for a given circuit has a fixed size.

#include <optional>
#include <vector>

#include "tdx/circuit.hpp"
#include "tdx/gkr.hpp"
#include "tdx/keys.hpp"
#include "tdx/pcs.hpp"
#include "tdx/transcript.hpp"

namespace tdx {

inline constexpr uint8_t kProofVersion = 1;
inline constexpr size_t kStatementSize = 4 + 1 + 32 + 32 + 1;
inline constexpr size_t kRoundCoeffs = 3;

struct Statement {
    Digest model_digest{};
    Digest commitment{};
    int verdict = 0; // 1 = fake

    friend bool operator==(const Statement&, const Statement&) = default;
};

struct Proof {
    GkrProof gkr;
    PcsProof pcs;
};

inline Bytes serialize_statement(const Statement& x) {
    ByteWriter w;
    w.tag("TDXS");
    w.u8(kProofVersion);
    w.digest(x.model_digest);
    w.digest(x.commitment);
    w.u8(static_cast<uint8_t>(x.verdict));
    return std::move(w).take();
}

inline Statement deserialize_statement(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    r.expect_tag("TDXS", "statement");
    if (r.u8() != kProofVersion) throw FormatError("statement: unsupported version");
    Statement x;
    x.model_digest = r.digest();
    x.commitment = r.digest();
    const uint8_t v = r.u8();
    if (v > 1) throw FormatError("statement: verdict must be 0 or 1");
    x.verdict = v;
    r.expect_end("statement");
    return x;
}

namespace detail {

inline void write_rounds(ByteWriter& w, const SumcheckProof& p) {
    for (const auto& c : p.rounds) {
        if (c.size() != kRoundCoeffs) throw LengthError("proof: round polynomial has wrong degree");
        for (const auto& x : c) w.fp2(x);
    }
}

inline SumcheckProof read_rounds(ByteReader& r, size_t vars) {
    SumcheckProof p;
    p.rounds.resize(vars);
    for (auto& c : p.rounds) {
        c.resize(kRoundCoeffs);
        for (auto& x : c) x = r.fp2();
    }
    return p;
}

inline Transcript start_transcript(const VerificationKey& vk, const Statement& x) {
    Transcript tr("tdx/snark/v1");
    tr.absorb("vk", vk.digest);
    const auto s = serialize_statement(x);
    tr.absorb("statement", std::span<const uint8_t>(s));
    return tr;
}

} // namespace detail

/// Exact byte length of every proof for this key.
inline size_t proof_size(const VerificationKey& vk) {
    const size_t round = kRoundCoeffs * 16;
    size_t n = 4 + 1 + 1 + 4;
    for (size_t i = vk.layers.size() - 1; i >= 1; --i) n += 2 * (vk.layers[i - 1].layout.bits * round + 16);
    n += vk.layers[0].layout.bits * round + 16;
    const auto s = vk.pcs_shape();
    n += 2 * s.cols() * 16;
    n += vk.pcs.openings * ((s.rows() + 1) * 8 + std::countr_zero(s.code_len()) * 32);
    return n;
}

inline Bytes serialize_proof(const Proof& p) {
    ByteWriter w;
    w.tag("TDXF");
    w.u8(kProofVersion);
    w.u8(kHashIdSha256);
    w.u32(0); // patched below
    for (const auto& l : p.gkr.layers) {
        detail::write_rounds(w, l.phase1);
        w.fp2(l.vu);
        detail::write_rounds(w, l.phase2);
        w.fp2(l.vv);
    }
    detail::write_rounds(w, p.gkr.merge);
    w.fp2(p.gkr.v_star);
    for (const auto& x : p.pcs.c_test) w.fp2(x);
    for (const auto& x : p.pcs.c_eval) w.fp2(x);
    for (const auto& c : p.pcs.columns)
        for (const auto& x : c) w.fp(x);
    for (const auto& path : p.pcs.paths)
        for (const auto& d : path) w.digest(d);
    Bytes out = std::move(w).take();
    const auto n = static_cast<uint32_t>(out.size());
    for (int i = 0; i < 4; ++i) out[6 + i] = static_cast<uint8_t>(n >> (8 * i));
    return out;
}

inline Proof deserialize_proof(const VerificationKey& vk, std::span<const uint8_t> bytes) {
    if (bytes.size() != proof_size(vk)) throw FormatError("proof: wrong length for this key");
    ByteReader r(bytes);
    r.expect_tag("TDXF", "proof");
    if (r.u8() != kProofVersion) throw FormatError("proof: unsupported version");
    if (r.u8() != kHashIdSha256) throw FormatError("proof: unsupported hash id");
    if (r.u32() != bytes.size()) throw FormatError("proof: length field mismatch");
    Proof p;
    for (size_t i = vk.layers.size() - 1; i >= 1; --i) {
        const size_t vars = vk.layers[i - 1].layout.bits;
        GkrLayerProof l;
        l.phase1 = detail::read_rounds(r, vars);
        l.vu = r.fp2();
        l.phase2 = detail::read_rounds(r, vars);
        l.vv = r.fp2();
        p.gkr.layers.push_back(std::move(l));
    }
    p.gkr.merge = detail::read_rounds(r, vk.layers[0].layout.bits);
    p.gkr.v_star = r.fp2();
    const auto s = vk.pcs_shape();
    p.pcs.c_test.resize(s.cols());
    p.pcs.c_eval.resize(s.cols());
    for (auto& x : p.pcs.c_test) x = r.fp2();
    for (auto& x : p.pcs.c_eval) x = r.fp2();
    p.pcs.columns.assign(vk.pcs.openings, std::vector<Fp>(s.rows() + 1));
    for (auto& c : p.pcs.columns)
        for (auto& x : c) x = r.fp();
    p.pcs.paths.assign(vk.pcs.openings, std::vector<Digest>(static_cast<size_t>(std::countr_zero(s.code_len()))));
    for (auto& path : p.pcs.paths)
        for (auto& d : path) d = r.digest();
    r.expect_end("proof");
    return p;
}

struct Prepared {
    Statement statement;
    Witness witness;
};

/// Runs the model inside the circuit on `frame`, checks the witness and
/// commits to the input layer.
inline Prepared prepare(const ProvingKey& pk, const QuantTensor& frame, uint64_t blind_seed) {
    const auto& c = pk.circuit;
    Prepared out;
    out.witness = evaluate(c, pk.gates, frame, advice_gen(c, frame));
    out.witness.blind_seed = blind_seed;
    if (const long bad = first_violation(out.witness); bad >= 0)
        throw WitnessInvalid("constraint violated in region " + output_region_of(c, static_cast<size_t>(bad)));
    const auto v = output_verdict(out.witness);
    if (!v) throw WitnessInvalid("verdict wire is not a bit");
    out.statement.model_digest = pk.vk.model_digest;
    out.statement.commitment = pcs_commit(out.witness.layers[0], blind_seed, pk.vk.pcs).root();
    out.statement.verdict = *v;
    return out;
}

namespace detail {

inline Proof prove_core(const ProvingKey& pk, const Statement& x, const std::vector<std::vector<Fp>>& layers, const PcsState& st) {
    auto tr = start_transcript(pk.vk, x);
    Proof p;
    auto [gkr, claim] = gkr_prove(pk.vk.layers, pk.gates, layers, tr);
    p.gkr = std::move(gkr);
    p.pcs = pcs_open(st, claim.point, tr);
    return p;
}

inline void check_layers(const ProvingKey& pk, const Witness& w) {
    if (w.layers.size() != pk.vk.layers.size()) throw WitnessInvalid("witness depth mismatch");
    for (size_t i = 0; i < w.layers.size(); ++i)
        if (w.layers[i].size() != pk.vk.layers[i].layout.width()) throw WitnessInvalid("witness layer width mismatch");
}

} // namespace detail

/// Proves `x` from a witness. Refuses witnesses that violate a constraint,
/// disagree with the statement, or do not open the statement's commitment.
inline Proof prove(const ProvingKey& pk, const Statement& x, const Witness& w) {
    detail::check_layers(pk, w);
    if (x.model_digest != pk.vk.model_digest) throw WitnessInvalid("statement is for a different model");
    for (size_t i = 1; i < w.layers.size(); ++i)
        if (eval_layer(pk.gates[i], w.layers[i].size(), w.layers[i - 1]) != w.layers[i])
            throw WitnessInvalid("layer " + std::to_string(i) + " is not the evaluation of the previous layer");
    if (const long bad = first_violation(w); bad >= 0)
        throw WitnessInvalid("constraint violated in region " + output_region_of(pk.circuit, static_cast<size_t>(bad)));
    const auto v = output_verdict(w);
    if (!v || *v != x.verdict) throw WitnessInvalid("witness verdict differs from statement");
    const auto st = pcs_commit(w.layers[0], w.blind_seed, pk.vk.pcs);
    if (st.root() != x.commitment) throw WitnessInvalid("witness does not open the statement commitment");
    return detail::prove_core(pk, x, w.layers, st);
}

/// Runs the prover on whatever it is given; used to build cheating proofs.
inline Proof prove_unchecked(const ProvingKey& pk, const Statement& x, const Witness& w) {
    detail::check_layers(pk, w);
    return detail::prove_core(pk, x, w.layers, pcs_commit(w.layers[0], w.blind_seed, pk.vk.pcs));
}

inline bool verify(const VerificationKey& vk, const Statement& x, const Proof& p) {
    try {
        if (x.model_digest != vk.model_digest || (x.verdict != 0 && x.verdict != 1)) return false;
        auto tr = detail::start_transcript(vk, x);
        const auto claim = gkr_verify(vk.layers, x.verdict, p.gkr, tr);
        if (!claim) return false;
        return pcs_verify(x.commitment, vk.pcs_shape(), vk.pcs, claim->point, claim->value, p.pcs, tr);
    } catch (const Error&) {
        return false;
    }
}

/// Total over arbitrary bytes: malformed input is a rejection, never a throw.
inline bool verify_bytes(const VerificationKey& vk, std::span<const uint8_t> statement, std::span<const uint8_t> proof) {
    try {
        return verify(vk, deserialize_statement(statement), deserialize_proof(vk, proof));
    } catch (const Error&) {
        return false;
    }
}

} // namespace tdx
