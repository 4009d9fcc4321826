#include <gtest/gtest.h>

#include "tdx/field.hpp"
#include "tdx/hash.hpp"
#include "tdx/mle.hpp"

using namespace tdx;

namespace {

// Schoolbook reference using 128-bit arithmetic.
uint64_t ref_mul(uint64_t a, uint64_t b) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(a) * b) % Fp::kModulus);
}

Fp rand_fp(CounterRng& r) { return Fp(r.next_u64()); }
Fp2 rand_fp2(CounterRng& r) { return {rand_fp(r), rand_fp(r)}; }

} // namespace

TEST(Field, MatchesWideReference) {
    CounterRng rng("test/field", 1);
    for (int i = 0; i < 100000; ++i) {
        const uint64_t a = rng.next_u64() % Fp::kModulus, b = rng.next_u64() % Fp::kModulus;
        EXPECT_EQ((Fp(a) * Fp(b)).value(), ref_mul(a, b));
        const unsigned __int128 s = static_cast<unsigned __int128>(a) + b;
        EXPECT_EQ((Fp(a) + Fp(b)).value(), static_cast<uint64_t>(s % Fp::kModulus));
        EXPECT_EQ((Fp(a) - Fp(b) + Fp(b)).value(), a);
    }
    // Edge values around the modulus.
    const uint64_t edge[] = {0, 1, Fp::kModulus - 1, Fp::kModulus - 2, 0xffffffffULL, 0x100000000ULL, 0xfffffffeffffffffULL};
    for (uint64_t a : edge)
        for (uint64_t b : edge) EXPECT_EQ((Fp(a) * Fp(b)).value(), ref_mul(a, b));
}

TEST(Field, SignedEmbedding) {
    EXPECT_EQ(Fp::from_signed(-1).value(), Fp::kModulus - 1);
    EXPECT_EQ(Fp::from_signed(-128).to_signed(), -128);
    EXPECT_EQ(Fp::from_signed(int64_t{1} << 61).to_signed(), int64_t{1} << 61);
    EXPECT_FALSE(Fp(Fp::kModulus / 2).to_signed().has_value());
}

TEST(Field, InverseAndRoots) {
    CounterRng rng("test/field", 2);
    for (int i = 0; i < 1000; ++i) {
        Fp a = rand_fp(rng);
        if (a.is_zero()) continue;
        EXPECT_EQ(a * a.inverse(), Fp::one());
    }
    const Fp w = Fp::root_of_unity(32);
    EXPECT_EQ(w.pow(uint64_t{1} << 32), Fp::one());
    EXPECT_NE(w.pow(uint64_t{1} << 31), Fp::one());
}

TEST(Field, ExtensionLaws) {
    CounterRng rng("test/fp2", 3);
    for (int i = 0; i < 10000; ++i) {
        const Fp2 a = rand_fp2(rng), b = rand_fp2(rng), c = rand_fp2(rng);
        ASSERT_EQ((a * b) * c, a * (b * c));
        ASSERT_EQ(a * (b + c), a * b + a * c);
        ASSERT_EQ(a * b, b * a);
        ASSERT_EQ((a + b) - b, a);
        if (!a.is_zero()) {
            ASSERT_EQ(a * a.inverse(), Fp2::one());
        }
    }
    // X^2 = 7
    const Fp2 x(Fp::zero(), Fp::one());
    EXPECT_EQ(x * x, Fp2(Fp(7)));
}

TEST(Ntt, RoundTripAndDirectEvaluation) {
    CounterRng rng("test/ntt", 4);
    for (size_t n : {1u, 2u, 8u, 64u, 1024u}) {
        std::vector<Fp> coeffs(n);
        for (auto& c : coeffs) c = rand_fp(rng);
        auto evals = coeffs;
        ntt::forward(evals);
        const Fp w = Fp::root_of_unity(static_cast<unsigned>(std::countr_zero(n)));
        for (size_t k = 0; k < std::min<size_t>(n, 8); ++k) {
            Fp x = w.pow(k), acc = Fp::zero(), p = Fp::one();
            for (size_t i = 0; i < n; ++i, p *= x) acc += coeffs[i] * p;
            EXPECT_EQ(evals[k], acc);
        }
        ntt::inverse(evals);
        EXPECT_EQ(evals, coeffs);
    }
    std::vector<Fp> bad(3);
    EXPECT_THROW(ntt::forward(bad), LengthError);
}

TEST(Mle, LagrangeExamples) {
    const std::vector<Fp> v{Fp(3), Fp(5)};
    const std::vector<Fp2> r{Fp2(Fp(2))};
    EXPECT_EQ(mle_eval(v, r), Fp2(Fp(7)));

    CounterRng rng("test/mle", 5);
    std::vector<Fp> t(16);
    for (auto& x : t) x = rand_fp(rng);
    for (size_t i = 0; i < 16; ++i) {
        std::vector<Fp2> p(4);
        for (size_t k = 0; k < 4; ++k) p[k] = Fp((i >> k) & 1);
        EXPECT_EQ(mle_eval(t, p), Fp2(t[i]));
    }
    std::vector<Fp2> p(4);
    for (auto& x : p) x = rand_fp2(rng);
    Fp2 direct = Fp2::zero();
    for (size_t i = 0; i < 16; ++i) {
        Fp2 basis = Fp2::one();
        for (size_t k = 0; k < 4; ++k) basis *= ((i >> k) & 1) ? p[k] : Fp2::one() - p[k];
        direct += basis * t[i];
    }
    EXPECT_EQ(mle_eval(t, p), direct);
    const auto eq = eq_table(p);
    Fp2 viaeq = Fp2::zero();
    for (size_t i = 0; i < 16; ++i) viaeq += eq[i] * t[i];
    EXPECT_EQ(viaeq, direct);
}
