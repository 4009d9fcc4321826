#pragma once

// Hash-based multilinear commitment (Ligero-style).
//
// A vector of 2^k field elements is laid out as a rows x cols matrix (column
// index = low bits) and each row is Reed-Solomon encoded at rate 2^-rate_log,
// systematically: codeword position j * 2^rate_log carries message entry j.
// One extra random row masks the proximity combination. Columns of the
// encoded matrix are hashed into a Merkle tree whose root is the commitment.
//
// An opening at r = (r_lo, r_hi) sends
//   c_test = blind + sum_i gamma_i row_i      (proximity)
//   c_eval = sum_i eq(r_hi, i) row_i          (evaluation; <c_eval, eq(r_lo)> = v)
// and opens `openings` random columns, drawn from the non-systematic
// positions only, so no column exposes a committed entry verbatim.

#include <bit>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "tdx/bytes.hpp"
#include "tdx/field.hpp"
#include "tdx/hash.hpp"
#include "tdx/merkle.hpp"
#include "tdx/mle.hpp"
#include "tdx/transcript.hpp"

namespace tdx {

struct PcsParams {
    uint32_t rate_log = 2;  // rate 1/4
    uint32_t openings = 96; // column queries
    friend bool operator==(const PcsParams&, const PcsParams&) = default;
};

struct PcsShape {
    unsigned vars = 0, row_bits = 0, col_bits = 0, rate_log = 2;

    size_t rows() const { return size_t{1} << row_bits; }
    size_t cols() const { return size_t{1} << col_bits; }
    size_t code_len() const { return cols() << rate_log; }
    size_t parity_positions() const { return code_len() - cols(); }
};

/// Wide matrices: about 2^(k/2 + 1) columns. Verification cost is dominated
/// by encoding two combined rows and by the opened columns.
inline PcsShape pcs_shape(unsigned vars, const PcsParams& p) {
    if (p.rate_log < 1 || p.rate_log > 4) throw LengthError("pcs: rate_log must be in [1, 4]");
    if (p.openings < 1 || p.openings > 1024) throw LengthError("pcs: openings must be in [1, 1024]");
    if (vars > 30) throw LengthError("pcs: vector too long");
    PcsShape s;
    s.vars = vars;
    s.row_bits = vars / 2 > 0 ? vars / 2 - 1 : 0;
    s.col_bits = vars - s.row_bits;
    s.rate_log = p.rate_log;
    return s;
}

/// Relative distance of the code restricted to the parity positions.
inline double pcs_parity_distance(const PcsShape& s) {
    const double n = static_cast<double>(s.code_len()), k = static_cast<double>(s.cols());
    return (n - 2 * k + 1) / (n - k);
}

/// -log2 of the per-opening miss probability budget (1 - delta)^t.
inline double pcs_soundness_bits(const PcsShape& s, const PcsParams& p) {
    return -static_cast<double>(p.openings) * std::log2(1.0 - pcs_parity_distance(s));
}

namespace detail {

inline std::vector<Fp> rs_encode(std::span<const Fp> msg, unsigned rate_log) {
    std::vector<Fp> coeffs(msg.begin(), msg.end());
    ntt::inverse(coeffs);
    coeffs.resize(msg.size() << rate_log, Fp::zero());
    ntt::forward(coeffs);
    return coeffs;
}

inline std::vector<Fp2> rs_encode(std::span<const Fp2> msg, unsigned rate_log) {
    std::vector<Fp> a(msg.size()), b(msg.size());
    for (size_t i = 0; i < msg.size(); ++i) {
        a[i] = msg[i].c0();
        b[i] = msg[i].c1();
    }
    const auto ea = rs_encode(a, rate_log), eb = rs_encode(b, rate_log);
    std::vector<Fp2> out(ea.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = {ea[i], eb[i]};
    return out;
}

inline Digest column_leaf(std::span<const Fp> col) {
    ByteWriter w;
    for (const auto& x : col) w.fp(x);
    return merkle_leaf(w.data());
}

inline size_t parity_position(uint64_t k, unsigned rate_log) {
    const uint64_t per = (uint64_t{1} << rate_log) - 1;
    return static_cast<size_t>((k / per) << rate_log) + 1 + static_cast<size_t>(k % per);
}

} // namespace detail

struct PcsState {
    PcsShape shape;
    PcsParams params;
    std::vector<std::vector<Fp>> rows;     // data rows, then the blinding row
    std::vector<std::vector<Fp>> codewords; // same order
    MerkleTree tree;

    Digest root() const { return tree.root(); }
};

struct PcsProof {
    std::vector<Fp2> c_test, c_eval;
    std::vector<std::vector<Fp>> columns; // rows + 1 entries each
    std::vector<std::vector<Digest>> paths;
};

inline Fp random_fp(CounterRng& rng) {
    for (;;) {
        const uint64_t v = rng.next_u64();
        if (v < Fp::kModulus) return Fp(v);
    }
}

inline PcsState pcs_commit(std::span<const Fp> v, uint64_t blind_seed, const PcsParams& params = {}) {
    if (v.empty() || !std::has_single_bit(v.size())) throw LengthError("pcs: vector length must be a power of two");
    PcsState st;
    st.params = params;
    st.shape = pcs_shape(static_cast<unsigned>(std::countr_zero(v.size())), params);
    const size_t rows = st.shape.rows(), cols = st.shape.cols();
    for (size_t i = 0; i < rows; ++i) st.rows.emplace_back(v.begin() + static_cast<long>(i * cols), v.begin() + static_cast<long>((i + 1) * cols));
    CounterRng rng("tdx/pcs/blind", blind_seed);
    std::vector<Fp> blind(cols);
    for (auto& x : blind) x = random_fp(rng);
    st.rows.push_back(std::move(blind));
    for (const auto& r : st.rows) st.codewords.push_back(detail::rs_encode(r, st.shape.rate_log));

    std::vector<Digest> leaves(st.shape.code_len());
    std::vector<Fp> col(st.rows.size());
    for (size_t j = 0; j < leaves.size(); ++j) {
        for (size_t i = 0; i < st.rows.size(); ++i) col[i] = st.codewords[i][j];
        leaves[j] = detail::column_leaf(col);
    }
    st.tree = MerkleTree(std::move(leaves));
    return st;
}

namespace detail {

inline std::vector<size_t> pcs_queries(const PcsShape& s, const PcsParams& p, Transcript& tr) {
    std::vector<size_t> q;
    for (uint32_t i = 0; i < p.openings; ++i) q.push_back(parity_position(tr.challenge_index("pcs/column", s.parity_positions()), s.rate_log));
    return q;
}

} // namespace detail

inline PcsProof pcs_open(const PcsState& st, std::span<const Fp2> point, Transcript& tr) {
    const auto& s = st.shape;
    if (point.size() != s.vars) throw LengthError("pcs: point dimension mismatch");
    tr.absorb("pcs/root", st.root());
    const auto gamma = tr.challenge_point("pcs/gamma", s.rows());
    const auto eq_hi = eq_table(point.subspan(s.col_bits));

    PcsProof pf;
    pf.c_test.assign(st.rows.back().begin(), st.rows.back().end());
    pf.c_eval.assign(s.cols(), Fp2::zero());
    for (size_t i = 0; i < s.rows(); ++i)
        for (size_t j = 0; j < s.cols(); ++j) {
            pf.c_test[j] += gamma[i] * st.rows[i][j];
            pf.c_eval[j] += eq_hi[i] * st.rows[i][j];
        }
    tr.absorb("pcs/c_test", pf.c_test);
    tr.absorb("pcs/c_eval", pf.c_eval);
    for (size_t q : detail::pcs_queries(s, st.params, tr)) {
        std::vector<Fp> col(st.rows.size());
        for (size_t i = 0; i < st.rows.size(); ++i) col[i] = st.codewords[i][q];
        pf.columns.push_back(std::move(col));
        pf.paths.push_back(st.tree.path(q));
    }
    return pf;
}

inline bool pcs_verify(const Digest& root, const PcsShape& s, const PcsParams& params, std::span<const Fp2> point, Fp2 value,
                       const PcsProof& pf, Transcript& tr) {
    if (point.size() != s.vars || pf.c_test.size() != s.cols() || pf.c_eval.size() != s.cols()) return false;
    if (pf.columns.size() != params.openings || pf.paths.size() != params.openings) return false;
    tr.absorb("pcs/root", root);
    const auto gamma = tr.challenge_point("pcs/gamma", s.rows());
    const auto eq_hi = eq_table(point.subspan(s.col_bits));
    const auto eq_lo = eq_table(point.first(s.col_bits));
    tr.absorb("pcs/c_test", pf.c_test);
    tr.absorb("pcs/c_eval", pf.c_eval);

    Fp2 acc = Fp2::zero();
    for (size_t j = 0; j < s.cols(); ++j) acc += pf.c_eval[j] * eq_lo[j];
    if (!(acc == value)) return false;

    const auto enc_test = detail::rs_encode(std::span<const Fp2>(pf.c_test), s.rate_log);
    const auto enc_eval = detail::rs_encode(std::span<const Fp2>(pf.c_eval), s.rate_log);
    const auto queries = detail::pcs_queries(s, params, tr);
    for (size_t k = 0; k < queries.size(); ++k) {
        const auto& col = pf.columns[k];
        if (col.size() != s.rows() + 1) return false;
        if (!merkle_verify(root, queries[k], s.code_len(), detail::column_leaf(col), pf.paths[k])) return false;
        Fp2 t = col.back(), e = Fp2::zero();
        for (size_t i = 0; i < s.rows(); ++i) {
            t += gamma[i] * col[i];
            e += eq_hi[i] * col[i];
        }
        if (!(t == enc_test[queries[k]]) || !(e == enc_eval[queries[k]])) return false;
    }
    return true;
}

} // namespace tdx
