#pragma once

// Sumcheck for g(x) = prod_j f_j(x) with multilinear factors f_j given as
// evaluation tables. Each round sends the coefficients of the univariate
// restriction (degree <= number of factors); variables are bound LSB first.

#include <optional>
#include <vector>

#include "tdx/errors.hpp"
#include "tdx/field.hpp"
#include "tdx/transcript.hpp"

namespace tdx {

struct SumcheckProof {
    std::vector<std::vector<Fp2>> rounds; // coefficients, lowest degree first
};

struct SumcheckProverOutput {
    SumcheckProof proof;
    std::vector<Fp2> point;
    std::vector<Fp2> finals; // each factor's value at `point`
};

struct SumcheckClaim {
    std::vector<Fp2> point;
    Fp2 value; // claimed g(point)
};

inline Fp2 poly_eval(const std::vector<Fp2>& coeffs, Fp2 x) {
    Fp2 acc = Fp2::zero();
    for (size_t i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs[i];
    return acc;
}

/// Coefficients of the degree < n polynomial through (i, ys[i]), i = 0..n-1.
inline std::vector<Fp2> interpolate_consecutive(const std::vector<Fp2>& ys) {
    const size_t n = ys.size();
    std::vector<Fp2> out(n, Fp2::zero());
    for (size_t i = 0; i < n; ++i) {
        // basis_i(x) = prod_{j != i} (x - j) / (i - j)
        std::vector<Fp2> basis{Fp2::one()};
        Fp denom = Fp::one();
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            std::vector<Fp2> next(basis.size() + 1, Fp2::zero());
            for (size_t k = 0; k < basis.size(); ++k) {
                next[k + 1] += basis[k];
                next[k] -= basis[k] * Fp(j);
            }
            basis = std::move(next);
            denom *= Fp::from_signed(static_cast<int64_t>(i) - static_cast<int64_t>(j));
        }
        const Fp2 scale = ys[i] * denom.inverse();
        for (size_t k = 0; k < n; ++k) out[k] += basis[k] * scale;
    }
    return out;
}

inline SumcheckProverOutput sumcheck_prove(std::vector<std::vector<Fp2>> factors, Transcript& tr) {
    if (factors.empty()) throw LengthError("sumcheck: no factors");
    const size_t n = factors[0].size();
    if (!std::has_single_bit(n)) throw LengthError("sumcheck: table length must be a power of two");
    for (const auto& f : factors)
        if (f.size() != n) throw LengthError("sumcheck: factor length mismatch");
    const size_t d = factors.size();
    const size_t vars = static_cast<size_t>(std::countr_zero(n));

    SumcheckProverOutput out;
    std::vector<Fp2> evals(d + 1), lo(d), diff(d);
    for (size_t round = 0; round < vars; ++round) {
        const size_t half = factors[0].size() / 2;
        std::fill(evals.begin(), evals.end(), Fp2::zero());
        for (size_t i = 0; i < half; ++i) {
            for (size_t j = 0; j < d; ++j) {
                lo[j] = factors[j][2 * i];
                diff[j] = factors[j][2 * i + 1] - lo[j];
            }
            for (size_t t = 0; t <= d; ++t) {
                Fp2 prod = Fp2::one();
                const Fp tt(t);
                for (size_t j = 0; j < d; ++j) prod *= lo[j] + diff[j] * tt;
                evals[t] += prod;
            }
        }
        auto coeffs = interpolate_consecutive(evals);
        tr.absorb("sumcheck/round", std::span<const Fp2>(coeffs));
        const Fp2 r = tr.challenge_ext("sumcheck/challenge");
        out.point.push_back(r);
        for (auto& f : factors) {
            for (size_t i = 0; i < half; ++i) f[i] = f[2 * i] + r * (f[2 * i + 1] - f[2 * i]);
            f.resize(half);
        }
        out.proof.rounds.push_back(std::move(coeffs));
    }
    for (const auto& f : factors) out.finals.push_back(f[0]);
    return out;
}

/// Checks the round messages against `claim`; returns the reduced claim or
/// nullopt on rejection. The caller must check the reduced claim.
inline std::optional<SumcheckClaim> sumcheck_verify(const SumcheckProof& proof, Fp2 claim, size_t vars, size_t degree, Transcript& tr) {
    if (proof.rounds.size() != vars) return std::nullopt;
    SumcheckClaim out;
    for (const auto& coeffs : proof.rounds) {
        if (coeffs.empty() || coeffs.size() > degree + 1) return std::nullopt;
        // p(0) + p(1) = 2 c0 + c1 + ... + cd
        Fp2 s = coeffs[0];
        for (const auto& c : coeffs) s += c;
        if (!(s == claim)) return std::nullopt;
        tr.absorb("sumcheck/round", std::span<const Fp2>(coeffs));
        const Fp2 r = tr.challenge_ext("sumcheck/challenge");
        out.point.push_back(r);
        claim = poly_eval(coeffs, r);
    }
    out.value = claim;
    return out;
}

} // namespace tdx
