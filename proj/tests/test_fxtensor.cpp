#include <gtest/gtest.h>

#include "tdx/fxtensor.hpp"
#include "tdx/hash.hpp"

using namespace tdx;

TEST(Quantize, Examples) {
    EXPECT_EQ(quantize(Tensor({1}, {1.5}), 8).data[0], 384);
    EXPECT_EQ(quantize(Tensor({1}, {-0.25}), 8).data[0], -64);
    EXPECT_EQ(quantize(Tensor({1}, {0.00196}), 8).data[0], 1);
    EXPECT_THROW(quantize(Tensor({1}, {1e9}), 8), OverflowError);
    EXPECT_THROW(quantize(Tensor({1}, {1.0}), 3), std::invalid_argument);
    EXPECT_THROW(quantize(Tensor({1}, {1.0}), 17), std::invalid_argument);
}

TEST(Quantize, Dequantize) {
    EXPECT_EQ(dequantize(QuantTensor({1}, {384}, 8)).data[0], 1.5);
    EXPECT_EQ(dequantize(QuantTensor({1}, {0}, 8)).data[0], 0.0);
    EXPECT_EQ(dequantize(QuantTensor({1}, {-2}, 6)).data[0], -0.03125);
}

TEST(Conv, IdentityKernel) {
    QuantTensor x({1, 1, 1}, {256}, 8), w({1, 1, 3, 3}, 8), b({1}, 16);
    w.data[4] = 256;
    EXPECT_EQ(conv2d_q(x, w, b).data, std::vector<int64_t>{256});
}

TEST(Conv, AllOnesCenter) {
    QuantTensor x({1, 3, 3}, std::vector<int64_t>(9, 256), 8), w({1, 1, 3, 3}, std::vector<int64_t>(9, 256), 8), b({1}, 16);
    EXPECT_EQ(conv2d_q(x, w, b).at(0, 1, 1), 2304);
}

TEST(Conv, BiasOnly) {
    CounterRng rng("test/conv", 1);
    QuantTensor x({2, 4, 4}, 8), w({3, 2, 3, 3}, 8), b({3}, std::vector<int64_t>(3, 65536), 16);
    for (auto& v : x.data) v = rng.uniform_int(-1000, 1000);
    for (int64_t v : conv2d_q(x, w, b).data) EXPECT_EQ(v, 256);
}

TEST(Conv, Errors) {
    QuantTensor x({2, 4, 4}, 8), w({3, 1, 3, 3}, 8), b({3}, 16);
    EXPECT_THROW(conv2d_q(x, w, b), ShapeError);
    QuantTensor w2({3, 2, 3, 3}, 6);
    EXPECT_THROW(conv2d_q(x, w2, b), ShapeError);
}

TEST(Leaky, Examples) {
    EXPECT_EQ(leaky_relu_q(QuantTensor({1}, {500}, 8), 6).data[0], 500);
    EXPECT_EQ(leaky_relu_q(QuantTensor({1}, {-128}, 8), 6).data[0], -2);
    EXPECT_EQ(leaky_relu_q(QuantTensor({1}, {-1}, 8), 6).data[0], -1);
}

TEST(Pool, Examples) {
    EXPECT_EQ(maxpool2x2_q(QuantTensor({1, 2, 2}, {1, 2, 3, 4}, 8)).data[0], 4);
    EXPECT_EQ(maxpool2x2_q(QuantTensor({1, 2, 2}, {-5, -5, -5, -5}, 8)).data[0], -5);
    CounterRng rng("test/pool", 2);
    QuantTensor x({1, 4, 4}, 8);
    for (auto& v : x.data) v = rng.uniform_int(-100, 100);
    const auto y = maxpool2x2_q(x);
    for (size_t i = 0; i < 2; ++i)
        for (size_t j = 0; j < 2; ++j) {
            int64_t m = INT64_MIN;
            for (size_t a = 0; a < 2; ++a)
                for (size_t c = 0; c < 2; ++c) m = std::max(m, x.at(0, 2 * i + a, 2 * j + c));
            EXPECT_EQ(y.at(0, i, j), m);
        }
    EXPECT_THROW(maxpool2x2_q(QuantTensor({1, 3, 4}, 8)), ShapeError);
}

TEST(Fc, Examples) {
    EXPECT_EQ(fc_q(QuantTensor({1}, {100}, 8), QuantTensor({1, 1}, {256}, 8), QuantTensor({1}, 16)).data[0], 100);
    EXPECT_EQ(fc_q(QuantTensor({2}, {100, -100}, 8), QuantTensor({1, 2}, {256, 256}, 8), QuantTensor({1}, 16)).data[0], 0);

    CounterRng rng("test/fc", 3);
    QuantTensor x({5}, 8), w({3, 5}, 8), b({3}, 16);
    for (auto& v : x.data) v = rng.uniform_int(-500, 500);
    for (auto& v : w.data) v = rng.uniform_int(-500, 500);
    for (auto& v : b.data) v = rng.uniform_int(-5000, 5000);
    const auto y = fc_q(x, w, b);
    for (size_t r = 0; r < 3; ++r) {
        int64_t s = b.data[r];
        for (size_t k = 0; k < 5; ++k) s += w.data[r * 5 + k] * x.data[k];
        // floor division oracle
        int64_t q = s / 256;
        if (s % 256 != 0 && s < 0) --q;
        EXPECT_EQ(y.data[r], q);
    }
}
