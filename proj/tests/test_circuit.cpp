#include <gtest/gtest.h>

#include "tdx/circuit.hpp"

using namespace tdx;

namespace {

struct Toy {
    Model model = synth_model(42, ModelSpec::toy());
    LayeredCircuit circuit = compile(model);
    std::vector<ExplicitLayer> ex = materialize(circuit);

    QuantTensor frame(uint64_t seed) const { return quantize_frame(synth_frame(seed, model.spec), model.spec); }
};

const Toy& toy() {
    static const Toy t;
    return t;
}

int64_t wire(const LayeredCircuit& c, const Witness& w, size_t layer, const std::string& name, std::vector<uint32_t> coord) {
    return *w.layers[layer][c.layers[layer].layout.region(name).index(coord)].to_signed();
}

} // namespace

TEST(Circuit, ConstantDepthLayout) {
    const auto& c = toy().circuit;
    EXPECT_EQ(c.depth(), kCircuitDepth);
    EXPECT_NO_THROW(validate_circuit(c));
    EXPECT_EQ(c.output().region("verdict").offset, 0u);
    // Depth does not depend on the input size.
    const auto big = compile(synth_model(42, ModelSpec::toy(32)));
    EXPECT_EQ(big.depth(), kCircuitDepth);
    EXPECT_GT(circuit_stats(big).gates, 3 * circuit_stats(c).gates);
}

TEST(Circuit, HonestWitnessSatisfiesConstraints) {
    const auto& t = toy();
    for (uint64_t seed = 0; seed < 10; ++seed) {
        const auto frame = t.frame(seed);
        const auto trace = infer_quantized(t.model, frame);
        const auto w = evaluate(t.circuit, t.ex, frame, advice_gen(t.circuit, frame));
        ASSERT_EQ(first_violation(w), -1) << output_region_of(t.circuit, static_cast<size_t>(first_violation(w)));
        ASSERT_EQ(output_verdict(w), trace.verdict);
        // Intermediate wires match the integer forward pass.
        for (size_t b = 0; b < kNumBlocks; ++b) {
            const auto& bt = trace.blocks[b];
            const auto n = std::to_string(b);
            for (uint32_t k = 0; k < bt.act.shape[0]; ++k)
                for (uint32_t i = 0; i < bt.act.shape[1]; i += 3)
                    for (uint32_t j = 0; j < bt.act.shape[2]; j += 3)
                        ASSERT_EQ(wire(t.circuit, w, 1, "y" + n, {k, i, j}), bt.act.at(k, i, j));
            for (uint32_t k = 0; k < bt.pooled.shape[0]; ++k)
                for (uint32_t i = 0; i < bt.pooled.shape[1]; ++i)
                    for (uint32_t j = 0; j < bt.pooled.shape[2]; ++j)
                        ASSERT_EQ(wire(t.circuit, w, 3, "p" + n, {k, i, j}), bt.pooled.at(k, i, j));
        }
        for (uint32_t h = 0; h < t.model.spec.hidden; ++h) ASSERT_EQ(wire(t.circuit, w, 1, "yh", {h}), trace.fc1_act.data[h]);
    }
}

TEST(Circuit, ZeroModelZeroFrame) {
    const auto s = ModelSpec::toy();
    auto m = synth_model(1, s);
    for (auto& c : m.weights.conv) {
        std::fill(c.weight.data.begin(), c.weight.data.end(), 0);
        std::fill(c.bias.data.begin(), c.bias.data.end(), 0);
    }
    for (auto* t : {&m.weights.fc1_w, &m.weights.fc1_b, &m.weights.fc2_w, &m.weights.fc2_b}) std::fill(t->data.begin(), t->data.end(), 0);
    const auto c = compile(m);
    const QuantTensor frame(s.input_shape(), 8);
    const auto w = evaluate(c, frame, advice_gen(c, frame));
    EXPECT_EQ(first_violation(w), -1);
    EXPECT_EQ(output_verdict(w), 1);
    for (size_t layer = 1; layer < c.depth(); ++layer)
        for (const auto& r : c.layers[layer].layout.regions) {
            const bool value_region = r.name[0] == 'y' || r.name[0] == 'p' || r.name.rfind("m1_", 0) == 0;
            if (!value_region) continue;
            for (uint64_t i = r.offset; i < r.offset + r.padded_size(); ++i) ASSERT_TRUE(w.layers[layer][i].is_zero()) << r.name;
        }
}

TEST(Circuit, SignGadgetExample) {
    // v = -128 with W = 9: v + 2^9 = 384 = 0b0110000000, top bit 0.
    const int64_t shifted = -128 + (int64_t{1} << 9);
    EXPECT_EQ(shifted, 384);
    std::vector<int> bits;
    for (int k = 0; k <= 9; ++k) bits.push_back((shifted >> k) & 1);
    EXPECT_EQ(bits, (std::vector<int>{0, 0, 0, 0, 0, 0, 0, 1, 1, 0}));
    int64_t back = -(int64_t{1} << 9);
    for (int k = 0; k <= 9; ++k) back += int64_t{bits[k]} << k;
    EXPECT_EQ(back, -128);
}

TEST(Circuit, EveryAdviceBitFlipIsCaught) {
    const auto& t = toy();
    const auto frame = t.frame(3);
    const auto base = advice_gen(t.circuit, frame);
    // Exhaustive over the bit wires of one gadget instance per advice region.
    size_t pos = 0;
    for (const auto& r : t.circuit.input().regions) {
        if (r.name == "frame") continue;
        std::vector<uint32_t> coord(r.axes.size(), 0);
        const bool bit_region = r.name != "qh" && r.name[0] != 'q';
        const uint32_t n = bit_region ? r.axes.back().extent : 1;
        for (uint32_t k = 0; k < n; ++k) {
            if (bit_region) coord.back() = k;
            auto adv = base;
            const size_t idx = pos + (r.index(coord) - r.offset);
            adv[idx] = bit_region ? Fp::one() - adv[idx] : adv[idx] + Fp::one();
            const auto w = evaluate(t.circuit, t.ex, frame, adv);
            ASSERT_NE(first_violation(w), -1) << r.name << " bit " << k;
        }
        pos += r.padded_size();
    }
}

TEST(Circuit, RandomAdviceMutationsAreCaught) {
    const auto& t = toy();
    const auto frame = t.frame(4);
    const auto base = advice_gen(t.circuit, frame);
    CounterRng rng("test/circuit", 1);
    // Only mutate wires that some gate reads (padding slots are inert).
    std::vector<size_t> live;
    size_t pos = 0;
    for (const auto& r : t.circuit.input().regions) {
        if (r.name == "frame") continue;
        std::vector<uint32_t> coord(r.axes.size(), 0);
        for (uint64_t i = 0; i < r.real_size(); ++i) {
            uint64_t rem = i;
            for (size_t k = r.axes.size(); k-- > 0;) {
                coord[k] = static_cast<uint32_t>(rem % r.axes[k].extent);
                rem /= r.axes[k].extent;
            }
            live.push_back(pos + (r.index(coord) - r.offset));
        }
        pos += r.padded_size();
    }
    for (int trial = 0; trial < 200; ++trial) {
        auto adv = base;
        const size_t i = live[rng.next_u64() % live.size()];
        adv[i] += Fp(1 + rng.next_u64() % 1000);
        ASSERT_NE(first_violation(evaluate(t.circuit, t.ex, frame, adv)), -1);
    }
}

TEST(Circuit, GadgetFuzz) {
    // Random in-range activations through a tiny model exercise every gadget.
    const auto& t = toy();
    CounterRng rng("test/circuit", 2);
    for (int trial = 0; trial < 30; ++trial) {
        QuantTensor frame(t.model.spec.input_shape(), 8);
        for (auto& v : frame.data) v = rng.uniform_int(0, 256);
        const auto w = evaluate(t.circuit, t.ex, frame, advice_gen(t.circuit, frame));
        ASSERT_EQ(first_violation(w), -1);
        ASSERT_EQ(output_verdict(w), infer_quantized(t.model, frame).verdict);
    }
}

TEST(Circuit, DigestSensitivity) {
    const auto& t = toy();
    const auto d = circuit_digest(t.circuit, t.ex);
    EXPECT_EQ(d, circuit_digest(t.circuit, materialize(t.circuit)));
    auto m = t.model;
    m.weights.conv[2].weight.data[7] += 1;
    const auto c2 = compile(m);
    EXPECT_NE(d, circuit_digest(c2, materialize(c2)));
}

TEST(Circuit, RejectsBadInputs) {
    const auto& t = toy();
    EXPECT_THROW(evaluate(t.circuit, t.ex, QuantTensor({3, 8, 8}, 8), {}), ShapeError);
    EXPECT_THROW(evaluate(t.circuit, t.ex, t.frame(0), Advice(5)), LayoutError);
}
