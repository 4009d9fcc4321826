#pragma once

// Prime field arithmetic over p = 2^64 - 2^32 + 1, its quadratic extension
// F_p[X]/(X^2 - 7), and radix-2 NTTs over the 2^32-order subgroup.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tdx/errors.hpp"

namespace tdx {

class Fp {
public:
    static constexpr uint64_t kModulus = 0xffffffff00000001ULL;
    static constexpr uint64_t kEpsilon = 0xffffffffULL; // 2^64 mod p
    static constexpr uint64_t kGenerator = 7;
    static constexpr unsigned kTwoAdicity = 32;

    constexpr Fp() = default;
    constexpr explicit Fp(uint64_t v) : v_(v >= kModulus ? v - kModulus : v) {}

    static constexpr Fp zero() { return Fp(); }
    static constexpr Fp one() { return Fp(1); }

    /// Embeds a signed integer as v mod p.
    static constexpr Fp from_signed(int64_t v) {
        if (v >= 0) return Fp(static_cast<uint64_t>(v));
        return Fp(kModulus - static_cast<uint64_t>(-(v + 1)) - 1);
    }

    /// Inverse of from_signed for |v| < 2^62; nullopt outside that window.
    constexpr std::optional<int64_t> to_signed() const {
        constexpr uint64_t kWindow = uint64_t{1} << 62;
        if (v_ < kWindow) return static_cast<int64_t>(v_);
        const uint64_t neg = kModulus - v_;
        if (neg <= kWindow) return -static_cast<int64_t>(neg);
        return std::nullopt;
    }

    constexpr uint64_t value() const { return v_; }
    constexpr bool is_zero() const { return v_ == 0; }

    friend constexpr Fp operator+(Fp a, Fp b) {
        uint64_t s = a.v_ + b.v_;
        // Overflow past 2^64 is folded back with +epsilon (2^64 = epsilon mod p).
        if (s < a.v_) s += kEpsilon;
        if (s >= kModulus) s -= kModulus;
        Fp r;
        r.v_ = s;
        return r;
    }
    friend constexpr Fp operator-(Fp a, Fp b) {
        Fp r;
        r.v_ = a.v_ >= b.v_ ? a.v_ - b.v_ : a.v_ + (kModulus - b.v_);
        return r;
    }
    constexpr Fp operator-() const { return Fp() - *this; }
    friend constexpr Fp operator*(Fp a, Fp b) { return reduce128(static_cast<unsigned __int128>(a.v_) * b.v_); }

    constexpr Fp& operator+=(Fp o) { return *this = *this + o; }
    constexpr Fp& operator-=(Fp o) { return *this = *this - o; }
    constexpr Fp& operator*=(Fp o) { return *this = *this * o; }
    friend constexpr bool operator==(Fp a, Fp b) { return a.v_ == b.v_; }

    constexpr Fp pow(uint64_t e) const {
        Fp base = *this, acc = one();
        while (e) {
            if (e & 1) acc *= base;
            base *= base;
            e >>= 1;
        }
        return acc;
    }
    constexpr Fp inverse() const { return pow(kModulus - 2); }

    /// Primitive 2^log_n-th root of unity.
    static Fp root_of_unity(unsigned log_n) {
        if (log_n > kTwoAdicity) throw LengthError("root_of_unity: order exceeds 2-adicity");
        return Fp(kGenerator).pow((kModulus - 1) >> log_n);
    }

private:
    static constexpr Fp reduce128(unsigned __int128 x) {
        const uint64_t lo = static_cast<uint64_t>(x);
        const uint64_t hi = static_cast<uint64_t>(x >> 64);
        const uint64_t hi_hi = hi >> 32;
        const uint64_t hi_lo = hi & kEpsilon;
        // x = lo + hi_lo * 2^64 + hi_hi * 2^96, with 2^96 = -1 and 2^64 = epsilon.
        uint64_t t0 = lo - hi_hi;
        if (lo < hi_hi) t0 -= kEpsilon;
        const uint64_t t1 = hi_lo * kEpsilon;
        uint64_t t2 = t0 + t1;
        if (t2 < t0) t2 += kEpsilon;
        if (t2 >= kModulus) t2 -= kModulus;
        Fp r;
        r.v_ = t2;
        return r;
    }

    uint64_t v_ = 0;
};

/// Quadratic extension a + b*X with X^2 = 7 (7 is a non-residue mod p).
class Fp2 {
public:
    static constexpr uint64_t kNonResidue = 7;

    constexpr Fp2() = default;
    constexpr Fp2(Fp a) : c0_(a) {} // NOLINT: base field embeds implicitly
    constexpr Fp2(Fp a, Fp b) : c0_(a), c1_(b) {}

    static constexpr Fp2 zero() { return {}; }
    static constexpr Fp2 one() { return Fp2(Fp::one()); }

    constexpr Fp c0() const { return c0_; }
    constexpr Fp c1() const { return c1_; }
    constexpr bool is_zero() const { return c0_.is_zero() && c1_.is_zero(); }

    friend constexpr Fp2 operator+(Fp2 a, Fp2 b) { return {a.c0_ + b.c0_, a.c1_ + b.c1_}; }
    friend constexpr Fp2 operator-(Fp2 a, Fp2 b) { return {a.c0_ - b.c0_, a.c1_ - b.c1_}; }
    constexpr Fp2 operator-() const { return {-c0_, -c1_}; }
    friend constexpr Fp2 operator*(Fp2 a, Fp2 b) {
        const Fp w(kNonResidue);
        return {a.c0_ * b.c0_ + w * (a.c1_ * b.c1_), a.c0_ * b.c1_ + a.c1_ * b.c0_};
    }
    friend constexpr Fp2 operator*(Fp2 a, Fp b) { return {a.c0_ * b, a.c1_ * b}; }
    friend constexpr Fp2 operator*(Fp b, Fp2 a) { return {a.c0_ * b, a.c1_ * b}; }

    constexpr Fp2& operator+=(Fp2 o) { return *this = *this + o; }
    constexpr Fp2& operator-=(Fp2 o) { return *this = *this - o; }
    constexpr Fp2& operator*=(Fp2 o) { return *this = *this * o; }
    friend constexpr bool operator==(Fp2 a, Fp2 b) { return a.c0_ == b.c0_ && a.c1_ == b.c1_; }

    constexpr Fp2 inverse() const {
        const Fp norm = c0_ * c0_ - Fp(kNonResidue) * (c1_ * c1_);
        const Fp inv = norm.inverse();
        return {c0_ * inv, -(c1_ * inv)};
    }

private:
    Fp c0_, c1_;
};

namespace ntt {

inline void bit_reverse(std::span<Fp> a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
}

/// In-place forward transform: coefficients -> evaluations at w^0..w^{n-1}.
inline void forward(std::span<Fp> a) {
    const size_t n = a.size();
    if (n <= 1) return;
    if (!std::has_single_bit(n)) throw LengthError("ntt: length must be a power of two");
    bit_reverse(a);
    for (size_t len = 2; len <= n; len <<= 1) {
        const Fp wlen = Fp::root_of_unity(static_cast<unsigned>(std::countr_zero(len)));
        std::vector<Fp> tw(len / 2);
        tw[0] = Fp::one();
        for (size_t k = 1; k < len / 2; ++k) tw[k] = tw[k - 1] * wlen;
        for (size_t i = 0; i < n; i += len) {
            for (size_t k = 0; k < len / 2; ++k) {
                const Fp u = a[i + k];
                const Fp v = a[i + k + len / 2] * tw[k];
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

inline void inverse(std::span<Fp> a) {
    const size_t n = a.size();
    if (n <= 1) return;
    forward(a);
    // Evaluations at w^{-k} are the forward outputs reversed on indices 1..n-1.
    std::reverse(a.begin() + 1, a.end());
    const Fp n_inv = Fp(n).inverse();
    for (auto& x : a) x *= n_inv;
}

} // namespace ntt

} // namespace tdx
