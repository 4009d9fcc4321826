#include <gtest/gtest.h>

#include "tdx/bounds.hpp"
#include "tdx/inference.hpp"
#include "tdx/model.hpp"

using namespace tdx;

namespace {

Weights zero_weights(const ModelSpec& s) {
    Weights w;
    const int f = static_cast<int>(s.frac_bits);
    for (size_t b = 0; b < kNumBlocks; ++b) {
        w.conv[b].weight = QuantTensor({s.blocks[b].out_ch, s.blocks[b].in_ch, 3, 3}, f);
        w.conv[b].bias = QuantTensor({s.blocks[b].out_ch}, 2 * f);
    }
    w.fc1_w = QuantTensor({s.hidden, s.flat_size()}, f);
    w.fc1_b = QuantTensor({s.hidden}, 2 * f);
    w.fc2_w = QuantTensor({1, s.hidden}, f);
    w.fc2_b = QuantTensor({1}, 2 * f);
    return w;
}

// Independent float forward pass with explicit loops (no shared kernels).
double oracle_logit(const ModelSpec& s, const FloatWeights& w, const Tensor& frame) {
    std::vector<double> x = frame.data;
    size_t c = s.channels, h = s.height, wd = s.width;
    for (size_t b = 0; b < kNumBlocks; ++b) {
        const size_t co = s.blocks[b].out_ch;
        std::vector<double> y(co * h * wd);
        for (size_t o = 0; o < co; ++o)
            for (size_t i = 0; i < h; ++i)
                for (size_t j = 0; j < wd; ++j) {
                    double acc = w.conv[b].bias.data[o];
                    for (size_t k = 0; k < c; ++k)
                        for (int di = -1; di <= 1; ++di)
                            for (int dj = -1; dj <= 1; ++dj) {
                                const long ii = long(i) + di, jj = long(j) + dj;
                                if (ii < 0 || jj < 0 || ii >= long(h) || jj >= long(wd)) continue;
                                acc += w.conv[b].weight.data[((o * c + k) * 3 + (di + 1)) * 3 + (dj + 1)] * x[(k * h + ii) * wd + jj];
                            }
                    y[(o * h + i) * wd + j] = acc < 0 ? acc / 64.0 : acc;
                }
        std::vector<double> p(co * (h / 2) * (wd / 2));
        for (size_t o = 0; o < co; ++o)
            for (size_t i = 0; i < h / 2; ++i)
                for (size_t j = 0; j < wd / 2; ++j) {
                    double m = -1e300;
                    for (int a = 0; a < 2; ++a)
                        for (int bb = 0; bb < 2; ++bb) m = std::max(m, y[(o * h + 2 * i + a) * wd + 2 * j + bb]);
                    p[(o * (h / 2) + i) * (wd / 2) + j] = m;
                }
        x = p;
        c = co;
        h /= 2;
        wd /= 2;
    }
    double logit = w.fc2_b.data[0];
    for (size_t r = 0; r < s.hidden; ++r) {
        double a = w.fc1_b.data[r];
        for (size_t k = 0; k < x.size(); ++k) a += w.fc1_w.data[r * x.size() + k] * x[k];
        logit += w.fc2_w.data[r] * (a < 0 ? a / 64.0 : a);
    }
    return logit;
}

} // namespace

TEST(Model, FullGeometryShapes) {
    const auto s = ModelSpec::full();
    s.validate();
    const auto w = zero_weights(s);
    const auto t = infer_quantized(s, w, QuantTensor(s.input_shape(), 8));
    const size_t expect[] = {112, 56, 28, 14};
    for (size_t b = 0; b < kNumBlocks; ++b) EXPECT_EQ(t.blocks[b].pooled.shape[1], expect[b]);
    EXPECT_EQ(t.logit, 0);
    EXPECT_EQ(t.verdict, 1);
    for (const auto& bt : t.blocks) EXPECT_EQ(bt.pooled.max_abs(), 0);
}

TEST(Model, ReferenceBoundaryRule) {
    const auto s = ModelSpec::toy();
    auto fw = dequantize_weights(zero_weights(s));
    const Tensor frame(s.input_shape());
    EXPECT_EQ(infer_reference(s, fw, frame).verdict, 1);
    EXPECT_EQ(infer_reference(s, fw, frame).logit, 0.0);
    fw.fc2_b.data[0] = -1.0;
    EXPECT_EQ(infer_reference(s, fw, frame).verdict, 0);
}

TEST(Model, ReferenceMatchesIndependentOracle) {
    const auto s = ModelSpec::toy();
    const auto fw = dequantize_weights(synth_weights(42, s));
    const auto frame = frame_from_rgb(synth_frame(7, s), s);
    EXPECT_NEAR(infer_reference(s, fw, frame).logit, oracle_logit(s, fw, frame), 1e-6);
}

TEST(Model, SpecValidation) {
    auto s = ModelSpec::toy();
    s.height = 20;
    EXPECT_THROW(s.validate(), ShapeError);
    s = ModelSpec::toy();
    s.blocks[2].in_ch = 3;
    EXPECT_THROW(s.validate(), ShapeError);
}

TEST(Model, FoldBatchnorm) {
    CounterRng rng("test/bn", 1);
    Tensor w({2, 1, 3, 3}), b({2});
    for (auto& v : w.data) v = rng.uniform01() - 0.5;
    b.data = {0.25, -0.5};
    BatchNormParams id{{1, 1}, {0, 0}, {0, 0}, {1, 1}, 0.0};
    auto [w1, b1] = fold_batchnorm(w, b, id);
    EXPECT_EQ(w1.data, w.data);
    EXPECT_EQ(b1.data, b.data);

    BatchNormParams bn{{2, 2}, {3, 3}, {1, 1}, {3, 3}, 1.0};
    auto [w2, b2] = fold_batchnorm(w, b, bn);
    for (size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(w2.data[i], w.data[i]);
    EXPECT_DOUBLE_EQ(b2.data[0], 3 + (0.25 - 1));
    EXPECT_DOUBLE_EQ(b2.data[1], 3 + (-0.5 - 1));

    BatchNormParams bad{{1, 1}, {0, 0}, {0, 0}, {-1, 1}, 0.0};
    EXPECT_THROW(fold_batchnorm(w, b, bad), DegenerateChannel);
}

TEST(Model, FoldBatchnormMatchesUnfolded) {
    CounterRng rng("test/bn", 2);
    Tensor w({3, 2, 3, 3}), b({3});
    for (auto& v : w.data) v = rng.uniform01() - 0.5;
    for (auto& v : b.data) v = rng.uniform01() - 0.5;
    BatchNormParams bn;
    for (int c = 0; c < 3; ++c) {
        bn.gamma.push_back(0.5 + rng.uniform01());
        bn.beta.push_back(rng.uniform01() - 0.5);
        bn.mean.push_back(rng.uniform01() - 0.5);
        bn.var.push_back(0.1 + rng.uniform01());
    }
    auto [fw, fb] = fold_batchnorm(w, b, bn);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor x({2, 5, 5});
        for (auto& v : x.data) v = rng.uniform01() * 2 - 1;
        const auto ref = batchnorm_f(conv2d_f(x, w, b), bn);
        const auto got = conv2d_f(x, fw, fb);
        for (size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(ref.data[i], got.data[i], 1e-5);
    }
}

TEST(Model, WeightsRoundTrip) {
    const auto s = ModelSpec::toy();
    const auto w = synth_weights(42, s);
    const auto bytes = save_weights(s, w);
    const auto m = load_weights(bytes);
    EXPECT_EQ(m.spec, s);
    EXPECT_EQ(m.weights, w);
    for (size_t cut : {size_t{0}, size_t{3}, size_t{10}, bytes.size() / 2, bytes.size() - 1})
        EXPECT_THROW(load_weights(std::span(bytes).first(cut)), FormatError);
    auto extra = bytes;
    extra.push_back(0);
    EXPECT_THROW(load_weights(extra), FormatError);
}

TEST(Model, BlockCountValidation) {
    const auto s = ModelSpec::full();
    const auto bytes = save_weights(s, zero_weights(s));
    EXPECT_EQ(load_weights(bytes).spec.hidden, 70u);
    // Rewrite the header as a 3-block model.
    ByteWriter w;
    w.tag("TDXW");
    w.u8(1);
    w.u32(3);
    w.u32(224);
    w.u32(224);
    w.u32(3);
    for (int i = 0; i < 3; ++i) {
        w.u32(3);
        w.u32(16);
    }
    w.u32(70);
    w.u32(8);
    w.u32(6);
    EXPECT_THROW(load_weights(std::move(w).take()), ShapeError);
}

TEST(Model, SynthDeterminism) {
    const auto s = ModelSpec::toy();
    EXPECT_EQ(synth_weights(0, s), synth_weights(0, s));
    EXPECT_NE(synth_weights(0, s), synth_weights(1, s));
    EXPECT_NO_THROW(bound_analysis(s, synth_weights(0, s)));
}

TEST(Model, DigestAvalanche) {
    const auto s = ModelSpec::toy();
    auto w = synth_weights(42, s);
    const auto d = model_digest(s, w);
    EXPECT_EQ(d, model_digest(s, w));
    w.conv[1].weight.data[5] ^= 1;
    EXPECT_NE(d, model_digest(s, w));
}

TEST(Model, GoldenDigest) {
    // Frozen from the first build; guards the PRNG, calibration and container layout.
    const auto s = ModelSpec::toy();
    EXPECT_EQ(to_hex(model_digest(s, synth_weights(42, s))), "64a8cd22a1985e7842f2ee9b59d243def7706fbcc06bb16c23e96aea320668ca");
}

TEST(Bounds, Examples) {
    const auto s = ModelSpec::toy();
    const auto w0 = zero_weights(s);
    auto b0 = bound_analysis(s, w0);
    EXPECT_EQ(b0.pixel_bits, 9);
    for (const auto& bb : b0.blocks) EXPECT_EQ(bb.acc, 0);

    auto w = w0;
    w.conv[0].bias.data = {100, -300, 5, 0};
    auto b1 = bound_analysis(s, w);
    EXPECT_EQ(b1.blocks[0].acc, 300);

    auto big = synth_weights(1, s);
    for (auto& v : big.fc1_w.data) v = (int64_t{1} << 24) - 1;
    for (auto& c : big.conv)
        for (auto& v : c.weight.data) v = (int64_t{1} << 24) - 1;
    EXPECT_THROW(bound_analysis(s, big), BoundOverflow);
}

TEST(Inference, QuantizedTracksReference) {
    const auto s = ModelSpec::toy();
    const auto m = synth_model(42, s);
    const auto fw = dequantize_weights(m.weights);
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const auto raw = synth_frame(seed, s);
        const auto t = infer_quantized(m, quantize_frame(raw, s));
        const auto ref = infer_reference(s, fw, frame_from_rgb(raw, s));
        EXPECT_NEAR(std::ldexp(double(t.fc2_acc.data[0]), -16), ref.logit, 0.1);
        if (std::abs(ref.logit) >= 0.05) {
            EXPECT_EQ(t.verdict, ref.verdict);
        }
    }
}

TEST(Inference, RejectsOutOfRangeFrame) {
    const auto s = ModelSpec::toy();
    const auto m = synth_model(42, s);
    QuantTensor f(s.input_shape(), 8);
    f.data[0] = 257;
    EXPECT_THROW(infer_quantized(m, f), OverflowError);
    EXPECT_THROW(quantize_frame(Bytes(10), s), ShapeError);
}
