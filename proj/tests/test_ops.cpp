#include "doctest.h"

#include <cmath>

#include "jsms/ops.hpp"
#include "jsms/rng.hpp"
#include "oracles.hpp"

using namespace jsms;

namespace {

double max_abs_diff(const Tensor& got, const std::vector<double>& want) {
    REQUIRE(got.numel() == static_cast<int64_t>(want.size()));
    double m = 0.0;
    for (int64_t k = 0; k < got.numel(); ++k) {
        m = std::max(m, std::abs(static_cast<double>(got[k]) - want[static_cast<size_t>(k)]));
    }
    return m;
}

}  // namespace

TEST_CASE("dilated conv, 1-D analogue: kernel touches every 2nd entry") {
    Tensor in({1, 1, 1, 5}, {1, 0, 0, 0, 1});
    Tensor w({1, 1, 1, 3}, {1, 1, 1});
    Tensor b({1});
    ConvParams p;
    p.kernel_h = 1;
    p.kernel_w = 3;
    p.dilation = 2;
    Tensor out = dilated_conv2d(in, w, b, p);
    REQUIRE(out.numel() == 1);
    CHECK(out[0] == doctest::Approx(2.0f));
}

TEST_CASE("1x1 kernel of value 2 doubles every element") {
    Rng rng(7);
    Tensor in = oracle::random_tensor({2, 3, 5, 4}, rng);
    Tensor w({3, 3, 1, 1});
    for (int64_t co = 0; co < 3; ++co) w[w.idx4(co, co, 0, 0)] = 2.0f;
    Tensor b({3});
    ConvParams p;
    p.kernel_h = p.kernel_w = 1;
    Tensor out = dilated_conv2d(in, w, b, p);
    for (int64_t k = 0; k < in.numel(); ++k) CHECK(out[k] == doctest::Approx(2.0f * in[k]));
}

TEST_CASE("random dilated conv matches the direct-sum oracle") {
    Rng rng(42);
    Tensor in = oracle::random_tensor({1, 2, 7, 7}, rng);
    Tensor w = oracle::random_tensor({4, 2, 3, 3}, rng);
    Tensor b = oracle::random_tensor({4}, rng);
    ConvParams p;
    p.dilation = 2;
    p.pad = 2;
    Tensor out = dilated_conv2d(in, w, b, p);
    auto want = oracle::conv2d(oracle::to_double(in), 1, 2, 7, 7, oracle::to_double(w), 4,
                               oracle::to_double(b), p);
    CHECK(max_abs_diff(out, want) <= 1e-5);
}

TEST_CASE("d=1 equals standard convolution by the oracle, over random configs") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        ConvParams p;
        p.stride = 1 + static_cast<int>(rng.below(2));
        p.pad = static_cast<int>(rng.below(3));
        Tensor in = oracle::random_tensor({1, 2, 8, 9}, rng);
        Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
        Tensor b = oracle::random_tensor({3}, rng);
        Tensor out = dilated_conv2d(in, w, b, p);
        auto want = oracle::conv2d(oracle::to_double(in), 1, 2, 8, 9, oracle::to_double(w), 3,
                                   oracle::to_double(b), p);
        CHECK(max_abs_diff(out, want) <= 1e-5);
    }
}

TEST_CASE("reflect padding matches the oracle and rejects oversize pads") {
    Rng rng(11);
    ConvParams p;
    p.pad = 2;
    p.pad_mode = PadMode::Reflect;
    Tensor in = oracle::random_tensor({1, 1, 5, 6}, rng);
    Tensor w = oracle::random_tensor({2, 1, 3, 3}, rng);
    Tensor b({2});
    auto want = oracle::conv2d(oracle::to_double(in), 1, 1, 5, 6, oracle::to_double(w), 2,
                               oracle::to_double(b), p);
    CHECK(max_abs_diff(dilated_conv2d(in, w, b, p), want) <= 1e-5);

    p.pad = 5;  // >= input extent
    CHECK_THROWS_AS(dilated_conv2d(in, w, b, p), DimensionError);
}

TEST_CASE("conv shape errors name the offending axis") {
    Tensor in({1, 2, 4, 4});
    Tensor w({3, 5, 3, 3});  // channel mismatch
    Tensor b({3});
    ConvParams p;
    p.pad = 1;
    CHECK_THROWS_WITH_AS(dilated_conv2d(in, w, b, p),
                         doctest::Contains("channel axis"), DimensionError);
}

TEST_CASE("max pool basics") {
    Tensor in({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor out = max_pool2d(in);
    CHECK(out[0] == 4.0f);

    Tensor cst = Tensor::full({1, 2, 4, 4}, 3.5f);
    Tensor cout = max_pool2d(cst);
    for (int64_t k = 0; k < cout.numel(); ++k) CHECK(cout[k] == 3.5f);
}

TEST_CASE("max pool matches the window-scan oracle on random 8x8, exactly") {
    Rng rng(19);
    Tensor in = oracle::random_tensor({1, 3, 8, 8}, rng);
    Tensor out = max_pool2d(in);
    auto want = oracle::maxpool(oracle::to_double(in), 3, 8, 8);
    CHECK(max_abs_diff(out, want) == 0.0);
}

TEST_CASE("max pool truncates odd trailing extents") {
    Tensor in({1, 1, 5, 7});
    Tensor out = max_pool2d(in);
    CHECK(out.dim(2) == 2);
    CHECK(out.dim(3) == 3);
}

TEST_CASE("softmax of equal logits over K=13 channels is uniform") {
    Tensor in = Tensor::full({1, 13, 2, 2}, 0.7f);
    Tensor out = softmax_channels(in);
    for (int64_t k = 0; k < out.numel(); ++k) CHECK(out[k] == doctest::Approx(1.0 / 13).epsilon(1e-6));
}

TEST_CASE("softmax fibers sum to 1 and are strictly positive") {
    Rng rng(23);
    Tensor in = oracle::random_tensor({2, 6, 3, 3}, rng, -8.0f, 8.0f);
    Tensor out = softmax_channels(in);
    for (int64_t n = 0; n < 2; ++n)
        for (int64_t y = 0; y < 3; ++y)
            for (int64_t x = 0; x < 3; ++x) {
                double s = 0.0;
                for (int64_t k = 0; k < 6; ++k) {
                    const float v = out[out.idx4(n, k, y, x)];
                    CHECK(v > 0.0f);
                    s += v;
                }
                CHECK(std::abs(s - 1.0) <= 1e-5);
            }
}

TEST_CASE("upsample factor 1 is identity") {
    Rng rng(5);
    Tensor in = oracle::random_tensor({1, 2, 3, 3}, rng);
    Tensor out = bilinear_upsample(in, 1);
    for (int64_t k = 0; k < in.numel(); ++k) CHECK(out[k] == in[k]);
}

TEST_CASE("upsample of 2x2 by 2 matches the corner-aligned closed form") {
    Tensor in({1, 1, 2, 2}, {0, 1, 2, 3});
    Tensor out = bilinear_upsample(in, 2);
    const std::vector<double> plane = {0, 1, 2, 3};
    for (int64_t y = 0; y < 4; ++y)
        for (int64_t x = 0; x < 4; ++x) {
            const double py = y * 1.0 / 3.0, px = x * 1.0 / 3.0;
            CHECK(out[out.idx4(0, 0, y, x)] ==
                  doctest::Approx(oracle::bilinear_at(plane, 2, 2, py, px)).epsilon(1e-6));
        }
}

TEST_CASE("elementwise identities") {
    Rng rng(9);
    Tensor a = oracle::random_tensor({1, 2, 4, 4}, rng);

    SUBCASE("mul by all-ones map is identity") {
        Tensor ones = Tensor::full({4, 4}, 1.0f);
        Tensor out = mul_map(a, ones);
        for (int64_t k = 0; k < a.numel(); ++k) CHECK(out[k] == a[k]);
    }
    SUBCASE("scale by 0 annihilates") {
        Tensor out = scale(a, 0.0f);
        for (int64_t k = 0; k < a.numel(); ++k) CHECK(out[k] == 0.0f);
    }
    SUBCASE("broadcast mul equals explicit tiling") {
        Tensor m = oracle::random_tensor({4, 4}, rng);
        Tensor tiled(a.shape());
        for (int64_t n = 0; n < 1; ++n)
            for (int64_t c = 0; c < 2; ++c)
                for (int64_t y = 0; y < 4; ++y)
                    for (int64_t x = 0; x < 4; ++x)
                        tiled[tiled.idx4(n, c, y, x)] = m[m.idx2(y, x)];
        Tensor want = mul(a, tiled);
        Tensor got = mul_map(a, m);
        for (int64_t k = 0; k < a.numel(); ++k) CHECK(got[k] == want[k]);
    }
    SUBCASE("incompatible shapes raise dimension errors") {
        CHECK_THROWS_AS(add(a, Tensor({1, 2, 4, 5})), DimensionError);
        CHECK_THROWS_AS(mul_map(a, Tensor({3, 4})), DimensionError);
    }
}

TEST_CASE("outputs stay finite for finite inputs") {
    Rng rng(77);
    Tensor in = oracle::random_tensor({1, 3, 9, 9}, rng, -50.0f, 50.0f);
    Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng, -5.0f, 5.0f);
    Tensor b = oracle::random_tensor({4}, rng);
    ConvParams p;
    p.pad = 1;
    CHECK(all_finite(dilated_conv2d(in, w, b, p)));
    CHECK(all_finite(softmax_channels(in)));
    CHECK(all_finite(max_pool2d(in)));
    CHECK(all_finite(bilinear_upsample(in, 3)));
}
