#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jsms/net.hpp"

namespace jsms {

// Binary checkpoint: magic "JSMS", u32 version=1, u32 tensor count, then per
// tensor: u16 name length, name bytes, u8 rank, u32 dims, float32 LE payload.
// A leading "__meta__" record carries [preset_id, num_classes, stage_id] so a
// checkpoint is self-describing for the CLI; it is an ordinary record as far
// as the format is concerned.

inline constexpr int kStageBaseline = 0;
inline constexpr int kStageJoint = 1;
inline constexpr int kStageJointContext = 2;

struct CheckpointMeta {
    Preset preset = Preset::Toy;
    int num_classes = 0;
    int stage = kStageBaseline;
};

void save_checkpoint(const NetworkSpec& spec, const NetworkState& state, int stage,
                     const std::string& path);

struct CheckpointRecord {
    std::string name;
    Tensor tensor;
};

struct LoadedCheckpoint {
    std::vector<CheckpointRecord> records;
    std::optional<CheckpointMeta> meta;

    NetworkState to_state() const;
};

LoadedCheckpoint read_checkpoint(const std::string& path);

/// Loads and validates against the target spec: every conv layer must have a
/// weight/bias record of the exact shape. Throws FormatError on magic,
/// version or truncation problems and StateError on shape disagreement.
NetworkState load_checkpoint(const std::string& path, const NetworkSpec& spec);

/// Rebuilds the pipeline (spec + state) recorded in a self-describing
/// checkpoint, re-inserting the context module for stage-3 checkpoints.
struct Pipeline {
    NetworkSpec spec;
    NetworkState state;
    int stage = kStageBaseline;

    bool uses_amplifier() const { return stage >= kStageJoint; }
};

Pipeline load_pipeline(const std::string& path);

}  // namespace jsms
