#pragma once

// Multilinear extensions over the boolean hypercube. Variable k of a point
// corresponds to bit k of the table index (LSB first).

#include <span>
#include <vector>

#include "tdx/errors.hpp"
#include "tdx/field.hpp"

namespace tdx {

/// eq(r, i) for every i in [0, 2^|r|).
inline std::vector<Fp2> eq_table(std::span<const Fp2> r) {
    std::vector<Fp2> t(size_t{1} << r.size());
    t[0] = Fp2::one();
    for (size_t k = 0; k < r.size(); ++k) {
        const size_t half = size_t{1} << k;
        for (size_t i = 0; i < half; ++i) {
            t[i + half] = t[i] * r[k];
            t[i] -= t[i + half];
        }
    }
    return t;
}

inline Fp2 eq_eval(std::span<const Fp2> a, std::span<const Fp2> b) {
    if (a.size() != b.size()) throw LengthError("eq_eval: point length mismatch");
    Fp2 acc = Fp2::one();
    for (size_t k = 0; k < a.size(); ++k) acc *= a[k] * b[k] + (Fp2::one() - a[k]) * (Fp2::one() - b[k]);
    return acc;
}

template <class T>
Fp2 mle_eval(std::span<const T> table, std::span<const Fp2> r) {
    if (table.size() != (size_t{1} << r.size())) throw LengthError("mle_eval: table length is not 2^|r|");
    std::vector<Fp2> cur(table.begin(), table.end());
    for (size_t k = 0; k < r.size(); ++k) {
        const size_t half = cur.size() / 2;
        for (size_t i = 0; i < half; ++i) cur[i] = cur[2 * i] + r[k] * (cur[2 * i + 1] - cur[2 * i]);
        cur.resize(half);
    }
    return cur[0];
}

template <class T>
Fp2 mle_eval(const std::vector<T>& table, std::span<const Fp2> r) {
    return mle_eval(std::span<const T>(table), r);
}

} // namespace tdx
