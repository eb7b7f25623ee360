#include "jsms/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "jsms/metrics.hpp"
#include "jsms/rng.hpp"

namespace fs = std::filesystem;

namespace jsms {

Palette default_palette(int num_classes) {
    if (num_classes != 6 && num_classes != 7) {
        throw ConfigError("default_palette: toy taxonomy has 6 or 7 classes");
    }
    Palette p;
    p.names = {"sky", "road", "wall", "box", "blob", "moving-box"};
    p.colors = {{{135, 176, 235}},
                {{128, 128, 128}},
                {{160, 110, 80}},
                {{200, 60, 60}},
                {{60, 180, 75}},
                {{255, 220, 0}}};
    if (num_classes == 7) {
        p.names.push_back("moving-blob");
        p.colors.push_back({{255, 0, 255}});
    }
    return p;
}

namespace {

double lattice(uint64_t seed, int64_t xi, int64_t yi) {
    const uint64_t h = splitmix64(seed ^ (static_cast<uint64_t>(xi) * 0x9e3779b97f4a7c15ULL) ^
                                  (static_cast<uint64_t>(yi) * 0xc2b2ae3d27d4eb4fULL));
    return static_cast<double>(h >> 11) * 0x1p-53;
}

/// Smooth value noise in [0,1] at integer world coordinates.
double value_noise(uint64_t seed, int64_t x, int64_t y, int scale) {
    const int64_t xi = x >= 0 ? x / scale : (x - scale + 1) / scale;
    const int64_t yi = y >= 0 ? y / scale : (y - scale + 1) / scale;
    const double fx = static_cast<double>(x - xi * scale) / scale;
    const double fy = static_cast<double>(y - yi * scale) / scale;
    const double v00 = lattice(seed, xi, yi), v01 = lattice(seed, xi + 1, yi);
    const double v10 = lattice(seed, xi, yi + 1), v11 = lattice(seed, xi + 1, yi + 1);
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

struct TextureParams {
    int base[3];
    int amp;
    int scale;
};

// Band/object texture statistics. Bases are offset by per-image and
// per-object jitter, so single-pixel color is ambiguous near class pairs.
TextureParams band_texture(int cls) {
    switch (cls) {
        case kSky:
            return {{110, 130, 185}, 18, 16};
        case kRoad:
            return {{105, 105, 105}, 35, 2};
        default:
            return {{150, 110, 85}, 35, 6};  // wall
    }
}

TextureParams object_texture(SceneObject::Kind kind) {
    if (kind == SceneObject::Box) return {{170, 70, 60}, 30, 3};
    return {{70, 150, 80}, 30, 3};
}

uint8_t clamp_u8(int v) { return static_cast<uint8_t>(std::clamp(v, 0, 255)); }

void shade(uint8_t* px, const TextureParams& t, uint64_t seed, int64_t wx, int64_t wy,
           int jitter) {
    const double n = value_noise(seed, wx, wy, t.scale) * 2.0 - 1.0;
    for (int c = 0; c < 3; ++c) {
        px[c] = clamp_u8(t.base[c] + jitter + static_cast<int>(n * t.amp));
    }
}

int band_class(const SceneSpec& s, int64_t world_y) {
    if (world_y < s.sky_end) return kSky;
    if (world_y < s.wall_end) return kWall;
    return kRoad;
}

bool inside_object(const SceneObject& o, int64_t ox, int64_t oy, int64_t lx, int64_t ly) {
    if (lx < ox || ly < oy || lx >= ox + o.w || ly >= oy + o.h) return false;
    if (o.kind == SceneObject::Box) return true;
    // ellipse inscribed in the rect
    const double cx = ox + o.w / 2.0, cy = oy + o.h / 2.0;
    const double dx = (lx + 0.5 - cx) / (o.w / 2.0), dy = (ly + 0.5 - cy) / (o.h / 2.0);
    return dx * dx + dy * dy <= 1.0;
}

}  // namespace

SampleRecord render_scene(const SceneSpec& s, std::string id, std::vector<int>* src_ids_t,
                          std::vector<int>* src_ids_t1) {
    SampleRecord r;
    r.id = std::move(id);
    const int64_t W = s.width, H = s.height;
    r.image_t.width = r.image_t1.width = W;
    r.image_t.height = r.image_t1.height = H;
    r.image_t.rgb.assign(static_cast<size_t>(W * H * 3), 0);
    r.image_t1.rgb.assign(static_cast<size_t>(W * H * 3), 0);
    r.flow.width = W;
    r.flow.height = H;
    r.flow.u.assign(static_cast<size_t>(W * H), 0.0f);
    r.flow.v.assign(static_cast<size_t>(W * H), 0.0f);
    r.labels.width = W;
    r.labels.height = H;
    r.labels.idx.assign(static_cast<size_t>(W * H), 0);
    if (src_ids_t) src_ids_t->assign(static_cast<size_t>(W * H), -1);
    if (src_ids_t1) src_ids_t1->assign(static_cast<size_t>(W * H), -1);

    const int img_jitter = static_cast<int>(splitmix64(s.seed) % 41) - 20;

    // two passes: frame==0 renders t (world origin 0), frame==1 renders t+1
    // (world origin shifted by the camera translation)
    for (int frame = 0; frame < 2; ++frame) {
        ImageU8& img = frame == 0 ? r.image_t : r.image_t1;
        const int off_x = frame == 0 ? 0 : s.cam_x;
        const int off_y = frame == 0 ? 0 : s.cam_y;
        for (int64_t y = 0; y < H; ++y) {
            for (int64_t x = 0; x < W; ++x) {
                const int64_t wx = x + off_x, wy = y + off_y;
                const int cls = band_class(s, wy);
                shade(&img.at(y, x, 0), band_texture(cls), s.seed ^ (0x1000u + cls), wx, wy,
                      img_jitter);
                int top = -1;
                for (size_t oi = 0; oi < s.objects.size(); ++oi) {
                    const SceneObject& o = s.objects[oi];
                    const int ox = frame == 0 ? o.x : o.x + o.vx - s.cam_x;
                    const int oy = frame == 0 ? o.y : o.y + o.vy - s.cam_y;
                    if (!inside_object(o, ox, oy, x, y)) continue;
                    top = static_cast<int>(oi);
                    shade(&img.at(y, x, 0), object_texture(o.kind), o.tex_seed, x - ox, y - oy,
                          img_jitter);
                }
                if (frame == 0) {
                    if (top >= 0) {
                        const SceneObject& o = s.objects[static_cast<size_t>(top)];
                        r.flow.u_at(y, x) = static_cast<float>(o.vx - s.cam_x);
                        r.flow.v_at(y, x) = static_cast<float>(o.vy - s.cam_y);
                        uint8_t lbl;
                        if (o.kind == SceneObject::Box) {
                            lbl = o.moving() ? kMovingBox : kBox;
                        } else {
                            lbl = o.moving() ? kMovingBlob : kBlob;
                        }
                        r.labels.at(y, x) = lbl;
                    } else {
                        r.flow.u_at(y, x) = static_cast<float>(-s.cam_x);
                        r.flow.v_at(y, x) = static_cast<float>(-s.cam_y);
                        r.labels.at(y, x) = static_cast<uint8_t>(cls);
                    }
                    if (src_ids_t) (*src_ids_t)[static_cast<size_t>(y * W + x)] = top;
                } else if (src_ids_t1) {
                    (*src_ids_t1)[static_cast<size_t>(y * W + x)] = top;
                }
            }
        }
    }
    return r;
}

SceneSpec sample_scene(int height, int width, int num_classes, uint64_t seed) {
    if (num_classes != 6 && num_classes != 7) {
        throw ConfigError("sample_scene: num_classes must be 6 or 7");
    }
    Rng rng(seed);
    const int min_dim = std::min(height, width);
    const int side_lo = std::max(6, min_dim * 12 / 64);
    const int side_hi = std::max(side_lo + 2, min_dim * 22 / 64);

    for (int attempt = 0; attempt < 64; ++attempt) {
        SceneSpec s;
        s.width = width;
        s.height = height;
        s.seed = splitmix64(seed ^ 0xabcdefULL) + attempt;
        s.sky_end = static_cast<int>(rng.range(height / 5, 2 * height / 5));
        s.wall_end = static_cast<int>(rng.range(height * 11 / 20, height * 3 / 4));
        s.cam_x = static_cast<int>(rng.range(-1, 1));
        s.cam_y = static_cast<int>(rng.range(-1, 1));

        const double cam_mag = std::hypot(s.cam_x, s.cam_y);
        auto place = [&](SceneObject::Kind kind, bool moving) -> bool {
            SceneObject o;
            o.kind = kind;
            o.tex_seed = splitmix64(s.seed ^ rng.next_u32());
            o.w = static_cast<int>(rng.range(side_lo, side_hi));
            o.h = static_cast<int>(rng.range(side_lo, side_hi));
            if (moving) {
                for (int t = 0; t < 32; ++t) {
                    o.vx = static_cast<int>(rng.range(-4, 4));
                    o.vy = static_cast<int>(rng.range(-4, 4));
                    const double rel = std::hypot(o.vx - s.cam_x, o.vy - s.cam_y);
                    // mover's screen flow must clearly dominate the ego-motion
                    if ((o.vx != 0 || o.vy != 0) && rel >= cam_mag + 1.5) break;
                    o.vx = o.vy = 0;
                }
                if (!o.moving()) return false;
            }
            for (int t = 0; t < 32; ++t) {
                o.x = static_cast<int>(rng.range(0, width - o.w));
                o.y = static_cast<int>(rng.range(0, height - o.h));
                const int x1 = o.x + o.vx - s.cam_x, y1 = o.y + o.vy - s.cam_y;
                if (x1 >= 0 && y1 >= 0 && x1 + o.w <= width && y1 + o.h <= height) {
                    s.objects.push_back(o);
                    return true;
                }
            }
            return false;
        };

        bool ok = place(SceneObject::Box, true);  // exactly one moving box
        const int n_static_boxes = static_cast<int>(rng.range(1, 2));
        for (int i = 0; i < n_static_boxes && ok; ++i) ok = place(SceneObject::Box, false);
        const int n_blobs = static_cast<int>(rng.range(0, 2));
        for (int i = 0; i < n_blobs && ok; ++i) {
            const bool blob_moves = num_classes == 7 && rng.coin();
            ok = place(SceneObject::Blob, blob_moves);
        }
        if (!ok) continue;

        // moving fraction bound check on the rendered labels
        SampleRecord probe = render_scene(s, "probe");
        int64_t moving_px = 0;
        for (uint8_t v : probe.labels.idx) {
            if (v >= kFirstMovingClass) ++moving_px;
        }
        const double frac = static_cast<double>(moving_px) / static_cast<double>(width * height);
        if (frac < 0.01 || frac > 0.40) continue;
        return s;
    }
    throw StateError("sample_scene: object placement failed after bounded retries (seed " +
                     std::to_string(seed) + ")");
}

std::vector<SampleRecord> generate_dataset(int n_samples, int height, int width, int num_classes,
                                           uint64_t seed) {
    if (n_samples < 1) throw ConfigError("generate_dataset: n_samples must be >= 1");
    std::vector<SampleRecord> out;
    const int n_train = (n_samples * 4) / 5;
    for (int i = 0; i < n_samples; ++i) {
        SceneSpec s = sample_scene(height, width, num_classes, stream_seed(seed, static_cast<uint64_t>(i)));
        char id[16];
        std::snprintf(id, sizeof(id), "%05d", i);
        SampleRecord r = render_scene(s, id);
        r.is_train = i < n_train;
        out.push_back(std::move(r));
    }
    return out;
}

void write_palette(const Palette& palette, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (int c = 0; c < palette.num_classes(); ++c) {
        j.push_back({{"index", c},
                     {"name", palette.names[static_cast<size_t>(c)]},
                     {"color", palette.colors[static_cast<size_t>(c)]}});
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot write palette: " + path);
    f << j.dump(2) << "\n";
}

Palette read_palette(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot read palette: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("palette parse error: " + std::string(e.what()));
    }
    Palette p;
    p.names.resize(j.size());
    p.colors.resize(j.size());
    for (const auto& entry : j) {
        const size_t idx = entry.at("index").get<size_t>();
        p.names.at(idx) = entry.at("name").get<std::string>();
        const auto col = entry.at("color");
        p.colors.at(idx) = {col.at(0).get<uint8_t>(), col.at(1).get<uint8_t>(),
                            col.at(2).get<uint8_t>()};
    }
    return p;
}

void write_dataset(const std::string& dir, const std::vector<SampleRecord>& samples,
                   const Palette& palette) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "flow");
    fs::create_directories(fs::path(dir) / "labels");
    std::ofstream split(fs::path(dir) / "split.txt", std::ios::trunc);
    for (const auto& s : samples) {
        write_png_rgb(s.image_t, (fs::path(dir) / "images" / (s.id + "_t.png")).string());
        write_png_rgb(s.image_t1, (fs::path(dir) / "images" / (s.id + "_t1.png")).string());
        write_flo(s.flow, (fs::path(dir) / "flow" / (s.id + ".flo")).string());
        write_label_map(s.labels, (fs::path(dir) / "labels" / (s.id + ".png")).string());
        split << s.id << "\t" << (s.is_train ? "train" : "val") << "\n";
    }
    write_palette(palette, (fs::path(dir) / "palette.json").string());
}

Dataset load_dataset(const std::string& dir) {
    Dataset d;
    d.palette = read_palette((fs::path(dir) / "palette.json").string());
    std::ifstream split(fs::path(dir) / "split.txt");
    if (!split) throw FormatError("cannot read split.txt in " + dir);
    std::string id, tag;
    while (split >> id >> tag) {
        SampleRecord s;
        s.id = id;
        s.image_t = read_png_rgb((fs::path(dir) / "images" / (id + "_t.png")).string());
        s.image_t1 = read_png_rgb((fs::path(dir) / "images" / (id + "_t1.png")).string());
        s.flow = read_flo((fs::path(dir) / "flow" / (id + ".flo")).string());
        s.labels = read_label_map((fs::path(dir) / "labels" / (id + ".png")).string());
        s.is_train = tag == "train";
        (s.is_train ? d.train : d.val).push_back(std::move(s));
    }
    return d;
}

ImageU8 colorize_labels(const LabelMap& map, const Palette& palette) {
    ImageU8 img;
    img.width = map.width;
    img.height = map.height;
    img.rgb.assign(static_cast<size_t>(map.width * map.height * 3), 0);
    for (int64_t k = 0; k < map.width * map.height; ++k) {
        const uint8_t v = map.idx[static_cast<size_t>(k)];
        if (v == kIgnoreIndex || v >= palette.num_classes()) continue;
        for (int c = 0; c < 3; ++c) {
            img.rgb[static_cast<size_t>(k * 3 + c)] = palette.colors[v][static_cast<size_t>(c)];
        }
    }
    return img;
}

}  // namespace jsms
