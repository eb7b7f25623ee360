#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "jsms/flow.hpp"
#include "jsms/image_io.hpp"
#include "jsms/net.hpp"

namespace jsms {

// Toy taxonomy: 5 stationary classes + moving variants. The 6-class default
// (C=5, M=1) keeps blobs stationary; the 7-class variant adds moving-blob.
enum SynthClass : uint8_t {
    kSky = 0,
    kRoad = 1,
    kWall = 2,
    kBox = 3,
    kBlob = 4,
    kMovingBox = 5,
    kMovingBlob = 6,
};
inline constexpr int kFirstMovingClass = 5;

struct Palette {
    std::vector<std::string> names;
    std::vector<std::array<uint8_t, 3>> colors;

    int num_classes() const { return static_cast<int>(names.size()); }
};

Palette default_palette(int num_classes);

struct SceneObject {
    enum Kind { Box, Blob } kind = Box;
    int x = 0, y = 0, w = 0, h = 0;  // screen rect at frame t
    int vx = 0, vy = 0;              // world velocity, pixels/frame (integer)
    uint64_t tex_seed = 0;

    bool moving() const { return vx != 0 || vy != 0; }
};

struct SceneSpec {
    int width = 64, height = 64;
    int sky_end = 0, wall_end = 0;  // world rows: sky [0,sky_end), wall [sky_end,wall_end), road below
    int cam_x = 0, cam_y = 0;       // camera translation between frames
    std::vector<SceneObject> objects;
    uint64_t seed = 0;  // texture seed
};

struct SampleRecord {
    std::string id;
    ImageU8 image_t, image_t1;
    FlowField flow;   // exact by construction
    LabelMap labels;  // joint labels for frame t
    bool is_train = true;
};

/// Renders both frames, the exact flow and the joint label map. The optional
/// id maps record which object (or -1 for background) is topmost per pixel,
/// for warp-consistency checks.
SampleRecord render_scene(const SceneSpec& spec, std::string id,
                          std::vector<int>* src_ids_t = nullptr,
                          std::vector<int>* src_ids_t1 = nullptr);

/// Draws a random scene satisfying all invariants (objects in frame in both
/// frames, moving fraction within [1%, 40%]). Throws StateError after
/// bounded retries.
SceneSpec sample_scene(int height, int width, int num_classes, uint64_t seed);

/// Deterministic dataset; sample i derives its seed from stream_seed(seed,i)
/// so serial and parallel generation agree. First 80% train, rest val.
std::vector<SampleRecord> generate_dataset(int n_samples, int height, int width, int num_classes,
                                           uint64_t seed);

// Dataset directory layout:
//   images/{id}_t.png, images/{id}_t1.png, flow/{id}.flo, labels/{id}.png,
//   palette.json, split.txt (id<TAB>train|val)
void write_dataset(const std::string& dir, const std::vector<SampleRecord>& samples,
                   const Palette& palette);

struct Dataset {
    std::vector<SampleRecord> train, val;
    Palette palette;
};

Dataset load_dataset(const std::string& dir);

void write_palette(const Palette& palette, const std::string& path);
Palette read_palette(const std::string& path);

/// Color raster for a label map using palette colors (ignore pixels black).
ImageU8 colorize_labels(const LabelMap& map, const Palette& palette);

}  // namespace jsms
