#include "jsms/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "jsms/context.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts unsupported");

namespace jsms {

namespace {

constexpr char kMagic[4] = {'J', 'S', 'M', 'S'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw FormatError("checkpoint truncated");
    return v;
}

void write_record(std::ofstream& f, const std::string& name, const Tensor& t) {
    write_pod<uint16_t>(f, static_cast<uint16_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint8_t>(f, static_cast<uint8_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) write_pod<uint32_t>(f, static_cast<uint32_t>(t.dim(i)));
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

CheckpointRecord read_record(std::ifstream& f) {
    const uint16_t name_len = read_pod<uint16_t>(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) throw FormatError("checkpoint truncated inside record name");
    const uint8_t rank = read_pod<uint8_t>(f);
    std::vector<int64_t> shape;
    for (int i = 0; i < rank; ++i) shape.push_back(static_cast<int64_t>(read_pod<uint32_t>(f)));
    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!f) throw FormatError("checkpoint truncated inside payload of '" + name + "'");
    return {std::move(name), std::move(t)};
}

int preset_id(Preset p) { return static_cast<int>(p); }

}  // namespace

void save_checkpoint(const NetworkSpec& spec, const NetworkState& state, int stage,
                     const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 4);
    write_pod<uint32_t>(f, kVersion);
    uint32_t count = 1;  // meta
    for (const auto& l : spec.layers)
        if (l.kind == LayerKind::Conv) count += 2;
    write_pod<uint32_t>(f, count);

    Tensor meta({3});
    meta[0] = static_cast<float>(preset_id(spec.preset));
    meta[1] = static_cast<float>(spec.num_classes);
    meta[2] = static_cast<float>(stage);
    write_record(f, "__meta__", meta);

    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Conv) continue;
        write_record(f, l.name + ".weight", state.weights.at(l.name));
        write_record(f, l.name + ".bias", state.biases.at(l.name));
    }
    if (!f) throw FormatError("checkpoint write failed: " + path);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("checkpoint magic mismatch in " + path);
    }
    const uint32_t version = read_pod<uint32_t>(f);
    if (version != kVersion) {
        throw FormatError("checkpoint version " + std::to_string(version) + " unsupported");
    }
    const uint32_t count = read_pod<uint32_t>(f);
    LoadedCheckpoint out;
    for (uint32_t i = 0; i < count; ++i) {
        CheckpointRecord r = read_record(f);
        if (r.name == "__meta__") {
            if (r.tensor.numel() != 3) throw FormatError("malformed __meta__ record");
            CheckpointMeta m;
            m.preset = static_cast<Preset>(static_cast<int>(r.tensor[0]));
            m.num_classes = static_cast<int>(r.tensor[1]);
            m.stage = static_cast<int>(r.tensor[2]);
            out.meta = m;
        } else {
            out.records.push_back(std::move(r));
        }
    }
    return out;
}

NetworkState LoadedCheckpoint::to_state() const {
    NetworkState s;
    for (const auto& r : records) {
        const auto dot = r.name.rfind('.');
        if (dot == std::string::npos) continue;
        const std::string layer = r.name.substr(0, dot);
        const std::string kind = r.name.substr(dot + 1);
        if (kind == "weight") {
            s.weights[layer] = r.tensor;
        } else if (kind == "bias") {
            s.biases[layer] = r.tensor;
        }
    }
    return s;
}

NetworkState load_checkpoint(const std::string& path, const NetworkSpec& spec) {
    LoadedCheckpoint ck = read_checkpoint(path);
    NetworkState s = ck.to_state();
    int in_ch = spec.in_channels;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::Conv) continue;
        auto wi = s.weights.find(l.name);
        auto bi = s.biases.find(l.name);
        if (wi == s.weights.end() || bi == s.biases.end()) {
            throw StateError("checkpoint lacks parameters for layer " + l.name);
        }
        const Tensor& w = wi->second;
        if (w.rank() != 4 || w.dim(0) != l.out_channels || w.dim(1) != in_ch ||
            w.dim(2) != l.conv.kernel_h || w.dim(3) != l.conv.kernel_w) {
            throw StateError("checkpoint shape mismatch at layer " + l.name + ": got " +
                             w.shape_str());
        }
        if (bi->second.rank() != 1 || bi->second.dim(0) != l.out_channels) {
            throw StateError("checkpoint bias shape mismatch at layer " + l.name);
        }
        in_ch = l.out_channels;
    }
    return s;
}

Pipeline load_pipeline(const std::string& path) {
    LoadedCheckpoint ck = read_checkpoint(path);
    if (!ck.meta) throw FormatError("checkpoint has no __meta__ record; cannot rebuild pipeline");
    Pipeline p;
    p.stage = ck.meta->stage;
    p.spec = build_front_end(ck.meta->preset, ck.meta->num_classes);
    p.state = ck.to_state();
    if (p.stage == kStageJointContext) {
        NetworkState dummy;  // context params come from the checkpoint itself
        NetworkSpec with_ctx = p.spec;
        insert_context(with_ctx, dummy);
        p.spec = with_ctx;
    }
    // re-validate against the rebuilt spec
    NetworkState checked = load_checkpoint(path, p.spec);
    p.state = std::move(checked);
    return p;
}

}  // namespace jsms
