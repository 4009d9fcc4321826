#include <gtest/gtest.h>

#include "tdx/acceptance.hpp"

using namespace tdx;

// The tamper harness must hit the wire it names, or soundness trials turn
// into edits of unconstrained padding.
TEST(Harness, RandomWireStaysInsideItsRegion) {
    const auto& c = acceptance::fixture().pk.circuit;
    CounterRng rng("harness", 0);
    for (const auto& name : advice_regions(c)) {
        const auto& r = c.input().region(name);
        for (int i = 0; i < 64; ++i) {
            const uint64_t idx = acceptance::detail::random_wire(r, rng);
            EXPECT_GE(idx, r.offset) << name;
            EXPECT_LT(idx, r.offset + r.padded_size()) << name;
        }
    }
}

TEST(Harness, MutatedAdviceEntryBreaksTheWitness) {
    const auto& f = acceptance::fixture();
    const auto& c = f.pk.circuit;
    const auto prep = prepare(f.pk, f.frame(7), 7);
    CounterRng rng("harness/advice", 0);
    for (const auto& name : advice_regions(c)) {
        auto input = prep.witness.layers[0];
        const uint64_t idx = acceptance::detail::random_wire(c.input().region(name), rng);
        input[idx] = input[idx] == Fp::one() ? Fp::zero() : input[idx] + Fp::one();
        const auto bad = evaluate_input(c, f.pk.gates, std::move(input));
        EXPECT_GE(first_violation(bad), 0) << name;
    }
}
