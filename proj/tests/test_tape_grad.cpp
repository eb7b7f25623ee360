#include "doctest.h"

#include <cmath>

#include "jsms/init.hpp"
#include "jsms/net.hpp"
#include "jsms/ops.hpp"
#include "jsms/rng.hpp"
#include "jsms/tape.hpp"
#include "jsms/train.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace jsms;

TEST_CASE("conv backward: zero upstream gives zero gradients") {
    Rng rng(1);
    Tensor in = oracle::random_tensor({1, 2, 5, 5}, rng);
    Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
    ConvParams p;
    p.pad = 1;
    Tensor up({1, 3, 5, 5});
    Tensor gin, gw, gb;
    dilated_conv2d_backward(in, w, p, up, &gin, &gw, &gb);
    for (int64_t k = 0; k < gin.numel(); ++k) CHECK(gin[k] == 0.0f);
    for (int64_t k = 0; k < gw.numel(); ++k) CHECK(gw[k] == 0.0f);
    for (int64_t k = 0; k < gb.numel(); ++k) CHECK(gb[k] == 0.0f);
}

TEST_CASE("conv backward: d sum(out) / d bias equals N*H'*W'") {
    Rng rng(2);
    const int64_t N = 2;
    Tensor in = oracle::random_tensor({N, 2, 6, 6}, rng);
    Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
    ConvParams p;
    p.pad = 1;
    const int64_t Ho = conv_out_extent(6, 3, 1, 1, 1), Wo = Ho;
    Tensor up = Tensor::full({N, 3, Ho, Wo}, 1.0f);
    Tensor gb;
    dilated_conv2d_backward(in, w, p, up, nullptr, nullptr, &gb);
    for (int64_t co = 0; co < 3; ++co) {
        CHECK(gb[co] == doctest::Approx(static_cast<float>(N * Ho * Wo)));
    }
}

TEST_CASE("conv gradients pass central finite differences") {
    Rng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
        ConvParams p;
        p.dilation = 1 + static_cast<int>(rng.below(2));
        p.stride = 1 + static_cast<int>(rng.below(2));
        p.pad = static_cast<int>(rng.below(2)) + 1;
        Tensor in = oracle::random_tensor({1, 2, 6, 6}, rng);
        Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);
        Tensor b = oracle::random_tensor({3}, rng);
        Tensor out = dilated_conv2d(in, w, b, p);
        Tensor s = oracle::random_tensor(out.shape(), rng);

        Tensor gin, gw, gb;
        dilated_conv2d_backward(in, w, p, s, &gin, &gw, &gb);
        auto loss = [&] { return gradcheck::weighted_sum(dilated_conv2d(in, w, b, p), s); };
        for (int64_t k = 0; k < in.numel(); k += 7) {
            CHECK(gradcheck::close(gin[k], gradcheck::fd(in, k, loss)));
        }
        for (int64_t k = 0; k < w.numel(); k += 5) {
            CHECK(gradcheck::close(gw[k], gradcheck::fd(w, k, loss)));
        }
        for (int64_t k = 0; k < b.numel(); ++k) {
            CHECK(gradcheck::close(gb[k], gradcheck::fd(b, k, loss)));
        }
    }
}

TEST_CASE("pool/relu/softmax/upsample/mul_map gradients pass finite differences") {
    Rng rng(4);

    SUBCASE("max pool routes gradient to the argmax") {
        Tensor in = oracle::random_tensor({1, 2, 6, 6}, rng);
        std::vector<int64_t> argmax;
        Tensor out = max_pool2d(in, &argmax);
        Tensor s = oracle::random_tensor(out.shape(), rng);
        Tensor gin = max_pool2d_backward(in.shape(), argmax, s);
        auto loss = [&] { return gradcheck::weighted_sum(max_pool2d(in), s); };
        for (int64_t k = 0; k < in.numel(); k += 3) {
            CHECK(gradcheck::close(gin[k], gradcheck::fd(in, k, loss)));
        }
    }
    SUBCASE("relu") {
        Tensor in = oracle::random_tensor({1, 2, 5, 5}, rng);
        // nudge values away from the kink where FD is undefined
        for (int64_t k = 0; k < in.numel(); ++k) {
            if (std::abs(in[k]) < 5e-3f) in[k] = 0.1f;
        }
        Tensor s = oracle::random_tensor({1, 2, 5, 5}, rng);
        Tensor gin = relu_backward(in, s);
        auto loss = [&] { return gradcheck::weighted_sum(relu(in), s); };
        for (int64_t k = 0; k < in.numel(); ++k) {
            CHECK(gradcheck::close(gin[k], gradcheck::fd(in, k, loss)));
        }
    }
    SUBCASE("softmax") {
        Tensor in = oracle::random_tensor({1, 5, 3, 3}, rng, -2.0f, 2.0f);
        Tensor s = oracle::random_tensor({1, 5, 3, 3}, rng);
        Tensor gin = softmax_channels_backward(softmax_channels(in), s);
        auto loss = [&] { return gradcheck::weighted_sum(softmax_channels(in), s); };
        for (int64_t k = 0; k < in.numel(); ++k) {
            CHECK(gradcheck::close(gin[k], gradcheck::fd(in, k, loss)));
        }
    }
    SUBCASE("bilinear upsample") {
        Tensor in = oracle::random_tensor({1, 2, 3, 4}, rng);
        Tensor s = oracle::random_tensor({1, 2, 9, 12}, rng);
        Tensor gin = bilinear_upsample_backward(in.shape(), 3, s);
        auto loss = [&] { return gradcheck::weighted_sum(bilinear_upsample(in, 3), s); };
        for (int64_t k = 0; k < in.numel(); ++k) {
            CHECK(gradcheck::close(gin[k], gradcheck::fd(in, k, loss)));
        }
    }
    SUBCASE("broadcast multiply") {
        Tensor in = oracle::random_tensor({1, 3, 4, 4}, rng);
        Tensor m = oracle::random_tensor({4, 4}, rng, 1.0f, 2.0f);
        Tensor s = oracle::random_tensor({1, 3, 4, 4}, rng);
        Tensor gin = mul_map_backward_input(m, s);
        auto loss = [&] { return gradcheck::weighted_sum(mul_map(in, m), s); };
        for (int64_t k = 0; k < in.numel(); ++k) {
            CHECK(gradcheck::close(gin[k], gradcheck::fd(in, k, loss)));
        }
    }
}

TEST_CASE("tape accumulates each parameter's gradient exactly once per use") {
    // y = x + x should have dy/dx = 2 everywhere
    GradTape tape;
    Tensor x({2, 2}, {1, 2, 3, 4});
    GradTape::Id xi = tape.watch(x);
    GradTape::Id y = t_add(tape, xi, xi);
    tape.backward(y, Tensor::full({2, 2}, 1.0f));
    for (int64_t k = 0; k < 4; ++k) CHECK(tape.grad(xi)[k] == 2.0f);
}

TEST_CASE("tape backward on missing record is a state error") {
    GradTape tape;
    Tensor x({1});
    GradTape::Id xi = tape.watch(x);
    tape.backward(xi, Tensor::full({1}, 1.0f));
    CHECK_THROWS_AS(tape.backward(xi, Tensor::full({1}, 1.0f)), StateError);
}

TEST_CASE("full toy network gradient passes finite differences") {
    NetworkSpec spec = build_front_end(Preset::Toy, 6);
    NetworkState state = init_state(spec, 123);
    Rng rng(9);
    Tensor input = oracle::random_tensor({1, 3, 16, 16}, rng);
    LabelMap labels;
    labels.width = labels.height = 4;
    labels.idx.resize(16);
    for (auto& v : labels.idx) v = static_cast<uint8_t>(rng.below(6));

    auto loss_value = [&] {
        Tensor logits = forward(spec, state, input);
        return softmax_xent_loss(logits, labels).loss;
    };

    GradTape tape;
    TapedParams params;
    GradTape::Id logits_id = forward_taped(tape, spec, state, input, {}, &params);
    LossResult lr = softmax_xent_loss(tape.value(logits_id), labels);
    tape.backward(logits_id, lr.grad);

    // sample a few coordinates in every layer; a fine step keeps the
    // difference quotient clear of relu kink crossings
    const double h = 1e-4;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Conv) continue;
        Tensor& w = state.weights.at(l.name);
        const Tensor& gw = tape.grad(params.weight_ids.at(l.name));
        const int64_t stride = std::max<int64_t>(1, w.numel() / 4);
        for (int64_t k = 0; k < w.numel(); k += stride) {
            CHECK(gradcheck::close(gw[k], gradcheck::fd(w, k, loss_value, h)));
        }
        Tensor& b = state.biases.at(l.name);
        const Tensor& gb = tape.grad(params.bias_ids.at(l.name));
        CHECK(gradcheck::close(gb[0], gradcheck::fd(b, 0, loss_value, h)));
    }
}

TEST_CASE("receptive field of a 1,2,4 dilation stack is exactly 15x15") {
    // single-channel stack of three 3x3 convs; footprint read off the input
    // gradient of a one-hot upstream at the center
    Rng rng(17);
    const int64_t S = 31;
    Tensor x = oracle::random_tensor({1, 1, S, S}, rng);
    GradTape tape;
    GradTape::Id xi = tape.watch(x);
    GradTape::Id h = xi;
    for (int d : {1, 2, 4}) {
        ConvParams p;
        p.dilation = d;
        p.pad = d;
        Tensor w = oracle::random_tensor({1, 1, 3, 3}, rng, 0.5f, 1.0f);  // nonzero taps
        GradTape::Id wi = tape.watch(w);
        GradTape::Id bi = tape.watch(Tensor({1}));
        h = t_conv2d(tape, h, wi, bi, p);
    }
    Tensor onehot(tape.value(h).shape());
    onehot[onehot.idx4(0, 0, S / 2, S / 2)] = 1.0f;
    tape.backward(h, onehot);
    const Tensor& gin = tape.grad(xi);
    int64_t min_y = S, max_y = -1, min_x = S, max_x = -1;
    for (int64_t y = 0; y < S; ++y)
        for (int64_t xx = 0; xx < S; ++xx)
            if (gin[gin.idx4(0, 0, y, xx)] != 0.0f) {
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
                min_x = std::min(min_x, xx);
                max_x = std::max(max_x, xx);
            }
    CHECK(max_y - min_y + 1 == 15);
    CHECK(max_x - min_x + 1 == 15);
    // and the footprint is a filled square
    int64_t nonzero = 0;
    for (int64_t k = 0; k < gin.numel(); ++k) nonzero += gin[k] != 0.0f;
    CHECK(nonzero == 15 * 15);
}
