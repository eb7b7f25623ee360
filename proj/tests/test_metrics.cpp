#include "doctest.h"

#include <sstream>

#include "jsms/metrics.hpp"
#include "jsms/rng.hpp"

using namespace jsms;

namespace {

LabelMap make_map(int64_t h, int64_t w, std::vector<uint8_t> idx) {
    LabelMap m;
    m.height = h;
    m.width = w;
    m.idx = std::move(idx);
    return m;
}

}  // namespace

TEST_CASE("textbook tallies: TP=3 FP=1 FN=1 gives IoU 0.6") {
    // class 1: three agree, one false alarm, one miss
    LabelMap gt = make_map(1, 6, {1, 1, 1, 1, 0, 0});
    LabelMap pred = make_map(1, 6, {1, 1, 1, 0, 1, 0});
    ConfusionMatrix cm(2);
    accumulate_confusion(pred, gt, cm);
    CHECK(cm.tp(1) == 3);
    CHECK(cm.fp(1) == 1);
    CHECK(cm.fn(1) == 1);
    CHECK(iou(cm, 1).value() == doctest::Approx(0.6));
    CHECK(ppv(cm, 1).value() == doctest::Approx(0.75));
}

TEST_CASE("PPV example: 9 hits, 1 false alarm") {
    ConfusionMatrix cm(2);
    LabelMap gt = make_map(1, 11, {1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 1});
    LabelMap pred = make_map(1, 11, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0});
    accumulate_confusion(pred, gt, cm);
    CHECK(ppv(cm, 1).value() == doctest::Approx(0.9));
}

TEST_CASE("perfect prediction scores 1.0 everywhere") {
    Rng rng(1);
    std::vector<uint8_t> idx(64);
    for (auto& v : idx) v = static_cast<uint8_t>(rng.below(4));
    LabelMap m = make_map(8, 8, idx);
    ConfusionMatrix cm(4);
    accumulate_confusion(m, m, cm);
    for (int c = 0; c < 4; ++c) {
        if (!iou(cm, c)) continue;  // class absent from this draw
        CHECK(iou(cm, c).value() == doctest::Approx(1.0));
        CHECK(ppv(cm, c).value() == doctest::Approx(1.0));
    }
    CHECK(mean_iou(cm).value() == doctest::Approx(1.0));
}

TEST_CASE("random pairs match an independent pixel-loop tally") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const int K = 5;
        std::vector<uint8_t> g(100), p(100);
        for (auto& v : g) v = static_cast<uint8_t>(rng.below(K));
        for (auto& v : p) v = static_cast<uint8_t>(rng.below(K));
        // sprinkle ignore pixels
        for (int i = 0; i < 10; ++i) g[static_cast<size_t>(rng.below(100))] = kIgnoreIndex;
        LabelMap gt = make_map(10, 10, g);
        LabelMap pred = make_map(10, 10, p);
        ConfusionMatrix cm(K);
        accumulate_confusion(pred, gt, cm);

        for (int c = 0; c < K; ++c) {
            uint64_t tp = 0, fp = 0, fn = 0;
            for (size_t i = 0; i < g.size(); ++i) {
                if (g[i] == kIgnoreIndex) continue;
                if (p[i] == c && g[i] == c) ++tp;
                if (p[i] == c && g[i] != c) ++fp;
                if (p[i] != c && g[i] == c) ++fn;
            }
            CHECK(cm.tp(c) == tp);
            CHECK(cm.fp(c) == fp);
            CHECK(cm.fn(c) == fn);
            // IoU has the larger denominator, so it never exceeds PPV
            if (iou(cm, c) && ppv(cm, c)) CHECK(iou(cm, c).value() <= ppv(cm, c).value());
        }
    }
}

TEST_CASE("accumulation is order-independent") {
    Rng rng(3);
    auto draw = [&](uint64_t) {
        std::vector<uint8_t> v(36);
        for (auto& e : v) e = static_cast<uint8_t>(rng.below(3));
        return make_map(6, 6, v);
    };
    std::vector<LabelMap> gts, preds;
    for (int i = 0; i < 6; ++i) {
        gts.push_back(draw(0));
        preds.push_back(draw(0));
    }
    ConfusionMatrix fwd(3), rev(3);
    for (size_t i = 0; i < gts.size(); ++i) accumulate_confusion(preds[i], gts[i], fwd);
    for (size_t i = gts.size(); i-- > 0;) accumulate_confusion(preds[i], gts[i], rev);
    for (int c = 0; c < 3; ++c) {
        CHECK(fwd.tp(c) == rev.tp(c));
        CHECK(fwd.fp(c) == rev.fp(c));
        CHECK(fwd.fn(c) == rev.fn(c));
    }
    CHECK(fwd.total() == rev.total());
}

TEST_CASE("absent classes report n/a and are excluded from the mean") {
    LabelMap gt = make_map(1, 4, {0, 0, 1, 1});
    LabelMap pred = make_map(1, 4, {0, 0, 1, 0});
    ConfusionMatrix cm(3);  // class 2 never occurs
    accumulate_confusion(pred, gt, cm);
    CHECK_FALSE(iou(cm, 2).has_value());
    CHECK_FALSE(ppv(cm, 2).has_value());
    // mean over classes 0 and 1 only: 2/3 and 1/2
    CHECK(mean_iou(cm).value() == doctest::Approx((2.0 / 3.0 + 0.5) / 2.0));
}

TEST_CASE("motion projection collapses moving classes onto 1") {
    LabelMap joint = make_map(1, 7, {0, 1, 2, 3, 4, 5, 6});
    LabelMap motion = motion_binary_projection(joint, 5);
    CHECK(motion.idx == std::vector<uint8_t>({0, 0, 0, 0, 0, 1, 1}));
    // ignore pixels stay ignored
    LabelMap ig = make_map(1, 2, {kIgnoreIndex, 5});
    LabelMap mig = motion_binary_projection(ig, 5);
    CHECK(mig.idx[0] == kIgnoreIndex);
    CHECK(mig.idx[1] == 1);
}

TEST_CASE("report text carries one row per class plus summary rows") {
    MetricsReport rep({"sky", "road", "wall", "box", "blob", "moving-box"}, 5);
    LabelMap gt = make_map(2, 3, {0, 1, 2, 3, 4, 5});
    rep.add(gt, gt);
    std::string text = rep.to_text();
    std::istringstream ss(text);
    std::string line;
    int rows = 0;
    bool saw_mean = false, saw_motion_iou = false, saw_motion_ppv = false;
    while (std::getline(ss, line)) {
        ++rows;
        if (line.rfind("mean_IoU", 0) == 0) saw_mean = true;
        if (line.rfind("motion_IoU", 0) == 0) saw_motion_iou = true;
        if (line.rfind("motion_PPV", 0) == 0) saw_motion_ppv = true;
    }
    CHECK(saw_mean);
    CHECK(saw_motion_iou);
    CHECK(saw_motion_ppv);
    // header + 6 classes + mean + stationary + moving + motion_IoU + motion_PPV
    CHECK(rows == 12);
    CHECK(text.find("n/a") == std::string::npos);  // every class present here
}
