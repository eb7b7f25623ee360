#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "jsms/checkpoint.hpp"
#include "jsms/init.hpp"
#include "jsms/net.hpp"
#include "jsms/rng.hpp"
#include "oracles.hpp"

using namespace jsms;

namespace {

std::string temp_path(const char* stem) {
    return std::string("/tmp/jsms_test_") + stem + ".ckpt";
}

}  // namespace

TEST_CASE("toy preset: shapes and downsample factor") {
    NetworkSpec spec = build_front_end(Preset::Toy, 6);
    CHECK(spec.downsample_factor() == 4);
    CHECK(spec.feature_channels() == 64);
    CHECK_FALSE(spec.has_context());

    NetworkState state = init_state(spec, 1);
    Rng rng(2);
    Tensor input = oracle::random_tensor({1, 3, 64, 64}, rng);
    Tensor logits = forward(spec, state, input);
    CHECK(logits.dim(0) == 1);
    CHECK(logits.dim(1) == 6);
    CHECK(logits.dim(2) == 16);
    CHECK(logits.dim(3) == 16);
}

TEST_CASE("pooled toy preset downsamples by 8; dilations stay at 1") {
    NetworkSpec spec = build_front_end(Preset::ToyPooled, 6);
    CHECK(spec.downsample_factor() == 8);
    CHECK(spec.find("conv3a")->conv.dilation == 1);
    CHECK(spec.find("fc1")->conv.dilation == 1);
}

TEST_CASE("full-scale preset: factor 8, 512 feature channels, dilated tail") {
    NetworkSpec spec = build_front_end(Preset::FullScale, 19);
    CHECK(spec.downsample_factor() == 8);
    CHECK(spec.feature_channels() == 512);
    CHECK(spec.find("conv5_1")->conv.dilation == 2);
    CHECK(spec.find("fc6")->conv.dilation == 4);
    CHECK(spec.find("fc6")->conv.kernel_h == 7);
}

TEST_CASE("string preset names resolve; unknown names are config errors") {
    CHECK(build_front_end("toy", 6).preset == Preset::Toy);
    CHECK(build_front_end("toy_pooled", 6).preset == Preset::ToyPooled);
    CHECK(build_front_end("full_scale", 6).preset == Preset::FullScale);
    CHECK_THROWS_AS(build_front_end("vgg", 6), ConfigError);
    CHECK_THROWS_AS(build_front_end(Preset::Toy, 1), ConfigError);
}

TEST_CASE("pool-removal surgery") {
    NetworkSpec pooled = build_front_end(Preset::ToyPooled, 6);

    SUBCASE("removing zero pools is the identity") {
        NetworkSpec same = apply_pool_removal_surgery(pooled, 0);
        CHECK(same.layers.size() == pooled.layers.size());
        CHECK(same.downsample_factor() == 8);
        CHECK(same.amplify_pos == pooled.amplify_pos);
    }
    SUBCASE("removing the last pool halves the factor and doubles trailing dilations") {
        NetworkSpec cut = apply_pool_removal_surgery(pooled, 1);
        CHECK(cut.downsample_factor() == 4);
        CHECK(cut.find("pool3") == nullptr);
        CHECK(cut.find("conv3a")->conv.dilation == 1);  // precedes the removed pool
        CHECK(cut.find("fc1")->conv.dilation == 2);
        CHECK(cut.find("fc1")->conv.pad == 2);
        CHECK(cut.find("head")->conv.dilation == 2);  // 1x1, dilation is moot but consistent
        // the amplification point moved left past the dropped pool
        CHECK(cut.amplify_pos == pooled.amplify_pos - 1);
    }
    SUBCASE("removing two pools compounds: x2 then x4") {
        NetworkSpec cut = apply_pool_removal_surgery(pooled, 2);
        CHECK(cut.downsample_factor() == 2);
        CHECK(cut.find("conv3a")->conv.dilation == 2);  // past one removed pool
        CHECK(cut.find("fc1")->conv.dilation == 4);     // past two
        CHECK(cut.find("fc1")->conv.pad == 4);
    }
    SUBCASE("removing more pools than exist is rejected") {
        CHECK_THROWS_AS(apply_pool_removal_surgery(pooled, 4), ConfigError);
    }
    SUBCASE("parameter shapes survive surgery: pooled weights run in the cut spec") {
        NetworkState state = init_state(pooled, 3);
        NetworkSpec cut = apply_pool_removal_surgery(pooled, 1);
        CHECK(init_state(cut, 3).param_count() == state.param_count());
        Rng rng(4);
        Tensor input = oracle::random_tensor({1, 3, 32, 32}, rng);
        Tensor logits = forward(cut, state, input);  // same parameter names and shapes
        CHECK(logits.dim(1) == 6);
        CHECK(logits.dim(2) == 8);
    }
}

TEST_CASE("checkpoint round-trip is bitwise") {
    NetworkSpec spec = build_front_end(Preset::Toy, 6);
    NetworkState state = init_state(spec, 7);
    const std::string path = temp_path("roundtrip");
    save_checkpoint(spec, state, kStageBaseline, path);

    NetworkState back = load_checkpoint(path, spec);
    REQUIRE(back.weights.size() == state.weights.size());
    for (const auto& [name, w] : state.weights) {
        const Tensor& r = back.weights.at(name);
        REQUIRE(r.same_shape(w));
        for (int64_t k = 0; k < w.numel(); ++k) CHECK(r[k] == w[k]);
    }
    for (const auto& [name, b] : state.biases) {
        const Tensor& r = back.biases.at(name);
        for (int64_t k = 0; k < b.numel(); ++k) CHECK(r[k] == b[k]);
    }

    LoadedCheckpoint loaded = read_checkpoint(path);
    REQUIRE(loaded.meta.has_value());
    CHECK(loaded.meta->preset == Preset::Toy);
    CHECK(loaded.meta->num_classes == 6);
    CHECK(loaded.meta->stage == kStageBaseline);
    std::remove(path.c_str());
}

TEST_CASE("pipeline reload reproduces predictions bitwise") {
    NetworkSpec spec = build_front_end(Preset::Toy, 6);
    NetworkState state = init_state(spec, 11);
    const std::string path = temp_path("pipeline");
    save_checkpoint(spec, state, kStageJoint, path);

    Pipeline p = load_pipeline(path);
    CHECK(p.stage == kStageJoint);
    CHECK(p.uses_amplifier());
    Rng rng(12);
    Tensor input = oracle::random_tensor({1, 3, 32, 32}, rng);
    LabelMap a = predict_labels(spec, state, input);
    LabelMap b = predict_labels(p.spec, p.state, input);
    CHECK(a.idx == b.idx);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects corruption") {
    NetworkSpec spec = build_front_end(Preset::Toy, 6);
    NetworkState state = init_state(spec, 7);
    const std::string path = temp_path("corrupt");
    save_checkpoint(spec, state, kStageBaseline, path);

    SUBCASE("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path, spec), FormatError);
    }
    SUBCASE("truncation") {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();
        CHECK_THROWS_AS(load_checkpoint(path, spec), FormatError);
    }
    SUBCASE("shape mismatch against a different spec") {
        NetworkSpec other = build_front_end(Preset::Toy, 7);
        CHECK_THROWS_AS(load_checkpoint(path, other), StateError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_checkpoint("/tmp/jsms_no_such_file.ckpt", spec), FormatError);
    }
    std::remove(path.c_str());
}

TEST_CASE("predict_labels") {
    NetworkSpec spec = build_front_end(Preset::Toy, 6);
    NetworkState state = init_state(spec, 21);
    Rng rng(22);
    Tensor input = oracle::random_tensor({1, 3, 32, 32}, rng);

    SUBCASE("full-resolution output, deterministic across calls") {
        LabelMap a = predict_labels(spec, state, input);
        CHECK(a.height == 32);
        CHECK(a.width == 32);
        LabelMap b = predict_labels(spec, state, input);
        CHECK(a.idx == b.idx);
        for (uint8_t v : a.idx) CHECK(v < 6);
    }
    SUBCASE("indivisible spatial dims are a dimension error that suggests padding") {
        Tensor odd = oracle::random_tensor({1, 3, 30, 32}, rng);
        CHECK_THROWS_WITH_AS(predict_labels(spec, state, odd), doctest::Contains("pad the input"),
                             DimensionError);
    }
    SUBCASE("argmax ties go to the lowest class index") {
        // all-zero parameters give identical logits everywhere
        NetworkState zeroed = state;
        for (auto& [name, w] : zeroed.weights) w = Tensor(w.shape());
        for (auto& [name, b] : zeroed.biases) b = Tensor(b.shape());
        LabelMap m = predict_labels(spec, zeroed, input);
        for (uint8_t v : m.idx) CHECK(v == 0);
    }
}

TEST_CASE("duplicate layer names are rejected") {
    NetworkSpec spec = build_front_end(Preset::Toy, 6);
    spec.layers.push_back(spec.layers[0]);  // second "conv1a"
    CHECK_THROWS_AS(spec.check_unique_names(), ConfigError);
}
