#include "jsms/train.hpp"

#include <cmath>

namespace jsms {

Stage stage_from_string(const std::string& s) {
    if (s == "baseline") return Stage::Baseline;
    if (s == "joint") return Stage::Joint;
    if (s == "joint-context" || s == "joint_context") return Stage::JointContext;
    throw ConfigError("unknown stage '" + s + "'");
}

LossResult softmax_xent_loss(const Tensor& logits, const LabelMap& labels) {
    require_rank(logits, 4, "softmax_xent_loss logits");
    const int64_t K = logits.dim(1), H = logits.dim(2), W = logits.dim(3);
    if (logits.dim(0) != 1 || labels.height != H || labels.width != W) {
        throw DimensionError("softmax_xent_loss: labels " + std::to_string(labels.height) + "x" +
                             std::to_string(labels.width) + " do not match logits " +
                             logits.shape_str());
    }
    Tensor probs = softmax_channels(logits);
    LossResult out;
    out.grad = Tensor(logits.shape());
    double loss = 0.0;
    int64_t count = 0;
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            const uint8_t lbl = labels.at(y, x);
            if (lbl == kIgnoreIndex) continue;
            if (lbl >= K) throw DimensionError("softmax_xent_loss: label index out of range");
            ++count;
            loss -= std::log(std::max(1e-30, static_cast<double>(probs[probs.idx4(0, lbl, y, x)])));
        }
    }
    if (count == 0) throw StateError("softmax_xent_loss: every pixel is ignored (empty batch)");
    const float inv = 1.0f / static_cast<float>(count);
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
            const uint8_t lbl = labels.at(y, x);
            if (lbl == kIgnoreIndex) continue;
            for (int64_t k = 0; k < K; ++k) {
                const int64_t i = logits.idx4(0, k, y, x);
                out.grad[i] = (probs[i] - (k == lbl ? 1.0f : 0.0f)) * inv;
            }
        }
    }
    out.loss = loss / static_cast<double>(count);
    return out;
}

LabelMap downsample_labels(const LabelMap& labels, int factor) {
    LabelMap out;
    out.height = labels.height / factor;
    out.width = labels.width / factor;
    out.idx.resize(static_cast<size_t>(out.height * out.width));
    for (int64_t y = 0; y < out.height; ++y) {
        for (int64_t x = 0; x < out.width; ++x) {
            out.at(y, x) = labels.at(y * factor + factor / 2, x * factor + factor / 2);
        }
    }
    return out;
}

void sgd_momentum_step(const NetworkSpec& spec, NetworkState& state,
                       const std::map<std::string, Tensor>& grad_w,
                       const std::map<std::string, Tensor>& grad_b,
                       std::map<std::string, Tensor>& velocity_w,
                       std::map<std::string, Tensor>& velocity_b, float lr, float momentum) {
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Conv || l.freeze) continue;
        auto gw = grad_w.find(l.name);
        auto gb = grad_b.find(l.name);
        if (gw == grad_w.end() || gb == grad_b.end()) continue;
        auto step = [&](Tensor& w, const Tensor& g, std::map<std::string, Tensor>& vel) {
            auto vi = vel.find(l.name);
            if (vi == vel.end()) vi = vel.emplace(l.name, Tensor(w.shape())).first;
            Tensor& v = vi->second;
            if (!v.same_shape(g)) throw DimensionError("sgd: gradient shape mismatch at " + l.name);
            for (int64_t k = 0; k < w.numel(); ++k) {
                v[k] = momentum * v[k] - lr * g[k];
                w[k] += v[k];
            }
        };
        step(state.weights.at(l.name), gw->second, velocity_w);
        step(state.biases.at(l.name), gb->second, velocity_b);
    }
}

AugmentParams sample_augment(Rng& rng, int64_t height, int64_t width, int crop, int pad) {
    const int64_t ph = height + 2 * pad, pw = width + 2 * pad;
    if (crop > ph || crop > pw) {
        throw ConfigError("augment: crop " + std::to_string(crop) +
                          " exceeds padded extent " + std::to_string(ph) + "x" + std::to_string(pw));
    }
    AugmentParams p;
    p.pad = pad;
    p.crop = crop;
    p.crop_y = static_cast<int>(rng.below(ph - crop + 1));
    p.crop_x = static_cast<int>(rng.below(pw - crop + 1));
    p.flip = rng.coin();
    return p;
}

namespace {

inline int64_t mirror(int64_t i, int64_t n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
}

// source pixel in the original raster for output pixel (y, x)
inline void src_pixel(const AugmentParams& p, int64_t H, int64_t W, int64_t y, int64_t x,
                      int64_t& sy, int64_t& sx) {
    const int64_t ox = p.flip ? p.crop - 1 - x : x;
    sy = mirror(y + p.crop_y - p.pad, H);
    sx = mirror(ox + p.crop_x - p.pad, W);
}

}  // namespace

AugmentedSample apply_augment(const ImageU8& image, const LabelMap& labels, const Tensor& amp,
                              const AugmentParams& p) {
    const int64_t H = image.height, W = image.width;
    if (labels.height != H || labels.width != W ||
        (amp.numel() > 0 && (amp.dim(0) != H || amp.dim(1) != W))) {
        throw DimensionError("apply_augment: rasters are not aligned");
    }
    AugmentedSample out;
    out.image.width = out.image.height = p.crop;
    out.image.rgb.resize(static_cast<size_t>(p.crop) * p.crop * 3);
    out.labels.width = out.labels.height = p.crop;
    out.labels.idx.resize(static_cast<size_t>(p.crop) * p.crop);
    const bool has_amp = amp.numel() > 0;
    if (has_amp) out.amp = Tensor({p.crop, p.crop});
    for (int64_t y = 0; y < p.crop; ++y) {
        for (int64_t x = 0; x < p.crop; ++x) {
            int64_t sy, sx;
            src_pixel(p, H, W, y, x, sy, sx);
            for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = image.at(sy, sx, c);
            out.labels.at(y, x) = labels.at(sy, sx);
            if (has_amp) out.amp[out.amp.idx2(y, x)] = amp[amp.idx2(sy, sx)];
        }
    }
    return out;
}

Tensor image_to_input(const ImageU8& img) {
    Tensor t({1, 3, img.height, img.width});
    for (int c = 0; c < 3; ++c) {
        for (int64_t y = 0; y < img.height; ++y) {
            for (int64_t x = 0; x < img.width; ++x) {
                t[t.idx4(0, c, y, x)] = static_cast<float>(img.at(y, x, c)) / 127.5f - 1.0f;
            }
        }
    }
    return t;
}

StageResult run_stage(const TrainConfig& config, NetworkSpec& spec, NetworkState& state,
                      const std::vector<SampleRecord>& train_samples) {
    if (config.learning_rate <= 0.0f) throw ConfigError("run_stage: learning_rate must be > 0");
    if (config.momentum < 0.0f || config.momentum >= 1.0f) {
        throw ConfigError("run_stage: momentum must be in [0,1)");
    }
    if (train_samples.empty()) throw StateError("run_stage: empty training set");

    // stage freeze contract
    for (auto& l : spec.layers) l.freeze = false;
    if (config.stage == Stage::Joint) spec = freeze_feature_convs(spec);
    const bool use_amp = config.stage != Stage::Baseline;

    // image-scale amplifier per sample, computed once
    std::vector<Tensor> amps;
    if (use_amp) {
        amps.reserve(train_samples.size());
        for (const auto& s : train_samples) amps.push_back(amplifier_from_flow(s.flow));
    }

    const int f = spec.downsample_factor();
    if (config.crop_size % f != 0) {
        throw ConfigError("run_stage: crop_size must be divisible by the downsample factor " +
                          std::to_string(f));
    }

    // when every layer before the amplification point is frozen (stage 2),
    // the prefix runs off-tape and no gradients are computed for it
    bool prefix_frozen = true;
    for (int i = 0; i < spec.amplify_pos; ++i) {
        const auto& l = spec.layers[static_cast<size_t>(i)];
        if (l.kind == LayerKind::Conv && !l.freeze) prefix_frozen = false;
    }
    const bool split_at_amplify = use_amp && prefix_frozen;

    Rng rng(config.seed);
    std::map<std::string, Tensor> vel_w, vel_b;
    StageResult result;
    result.loss_curve.reserve(static_cast<size_t>(config.iterations));

    for (int iter = 0; iter < config.iterations; ++iter) {
        const size_t si = static_cast<size_t>(rng.below(static_cast<int64_t>(train_samples.size())));
        const SampleRecord& sample = train_samples[si];
        const AugmentParams ap = sample_augment(rng, sample.image_t.height, sample.image_t.width,
                                                config.crop_size, config.reflect_pad);
        const AugmentedSample aug = apply_augment(
            sample.image_t, sample.labels, use_amp ? amps[si] : Tensor(), ap);
        const Tensor input = image_to_input(aug.image);
        const LabelMap head_labels = downsample_labels(aug.labels, f);

        Tensor amp_feat;
        ForwardOptions opts;
        if (use_amp) {
            amp_feat = resize_to_feature_grid(aug.amp, config.crop_size / f, config.crop_size / f);
            opts.amplifier = &amp_feat;
        }

        GradTape tape;
        TapedParams params;
        GradTape::Id logits_id;
        if (split_at_amplify) {
            NetworkSpec prefix = spec;
            prefix.layers.resize(static_cast<size_t>(spec.amplify_pos));
            prefix.amplify_pos = -1;  // amplifier applies in the taped suffix
            Tensor feat = forward(prefix, state, input);
            NetworkSpec suffix = spec;
            logits_id = forward_taped(tape, suffix, state, feat, opts, &params, spec.amplify_pos);
        } else {
            logits_id = forward_taped(tape, spec, state, input, opts, &params, 0);
        }

        LossResult loss = softmax_xent_loss(tape.value(logits_id), head_labels);
        tape.backward(logits_id, loss.grad);

        std::map<std::string, Tensor> gw, gb;
        for (const auto& l : spec.layers) {
            if (l.kind != LayerKind::Conv || l.freeze) continue;
            auto wi = params.weight_ids.find(l.name);
            if (wi == params.weight_ids.end()) continue;
            gw[l.name] = tape.grad(wi->second);
            gb[l.name] = tape.grad(params.bias_ids.at(l.name));
        }
        sgd_momentum_step(spec, state, gw, gb, vel_w, vel_b, config.learning_rate,
                          config.momentum);
        result.loss_curve.push_back(loss.loss);
    }
    return result;
}

MetricsReport evaluate(const NetworkSpec& spec, const NetworkState& state, bool use_amplifier,
                       const std::vector<SampleRecord>& samples, const Palette& palette) {
    MetricsReport report(palette.names, kFirstMovingClass);
    const int f = spec.downsample_factor();
    for (const auto& s : samples) {
        ForwardOptions opts;
        Tensor amp_feat;
        if (use_amplifier) {
            const Tensor amp_img = amplifier_from_flow(s.flow);
            amp_feat = resize_to_feature_grid(amp_img, s.image_t.height / f, s.image_t.width / f);
            opts.amplifier = &amp_feat;
        }
        const LabelMap pred = predict_labels(spec, state, image_to_input(s.image_t), opts);
        report.add(pred, s.labels);
    }
    return report;
}

}  // namespace jsms
