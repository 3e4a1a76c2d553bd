#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "semjson/binary_io.hpp"
#include "semjson/common.hpp"
#include "semjson/gcn.hpp"
#include "semjson/mlp.hpp"
#include "semjson/nn.hpp"

namespace semjson {

inline constexpr std::uint32_t kGcnMagic = 0x43474A53;  // "SJGC"
inline constexpr std::uint32_t kMlpMagic = 0x4C4D4A53;  // "SJML"
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Trained model plus what is needed to apply it to new data.
template <typename Model>
struct Checkpoint {
    Model model;
    std::vector<std::string> class_names;
    std::string scaler_ref;  // path of the scaler file, relative to the checkpoint
};

using GcnCheckpoint = Checkpoint<GcnModel<float>>;
using MlpCheckpoint = Checkpoint<MlpModel<float>>;

namespace detail {

// Layout: magic, version, input, hidden1, hidden2, classes (u32), seed (u64),
// class names, scaler reference, then W1 b1 W2 b2 W_out b_out as LE float32.
inline void write_three_layer(std::ostream& out, std::uint32_t magic, const nn::ThreeLayer<float>& p,
                              std::uint64_t seed, const std::vector<std::string>& classes, const std::string& scaler_ref) {
    if (classes.size() != p.head.out()) throw ContractViolation("checkpoint: class name count differs from model output");
    binio::put_u32(out, magic);
    binio::put_u32(out, kCheckpointVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(p.first.in()));
    binio::put_u32(out, static_cast<std::uint32_t>(p.first.out()));
    binio::put_u32(out, static_cast<std::uint32_t>(p.second.out()));
    binio::put_u32(out, static_cast<std::uint32_t>(p.head.out()));
    binio::put_u64(out, seed);
    for (const auto& c : classes) binio::put_string(out, c);
    binio::put_string(out, scaler_ref);
    for (auto t : p.tensors()) binio::put_f32(out, t);
}

inline nn::ThreeLayer<float> read_three_layer(binio::Reader& r, std::uint32_t magic, std::uint64_t& seed,
                                              std::vector<std::string>& classes, std::string& scaler_ref) {
    if (r.u32("magic") != magic) throw LoadError(r.source() + ": field 'magic' does not identify this model type");
    if (auto v = r.u32("version"); v != kCheckpointVersion)
        throw LoadError(r.source() + ": field 'version' is " + std::to_string(v) + ", expected " +
                        std::to_string(kCheckpointVersion));
    std::uint32_t in = r.u32("input");
    std::uint32_t h1 = r.u32("hidden1");
    std::uint32_t h2 = r.u32("hidden2");
    std::uint32_t c = r.u32("classes");
    if (in == 0 || in > (1U << 20)) throw LoadError(r.source() + ": field 'input' out of range");
    if (h1 == 0 || h1 > (1U << 16)) throw LoadError(r.source() + ": field 'hidden1' out of range");
    if (h2 == 0 || h2 > (1U << 16)) throw LoadError(r.source() + ": field 'hidden2' out of range");
    if (c < 2 || c > (1U << 16)) throw LoadError(r.source() + ": field 'classes' out of range");
    seed = r.u64("seed");
    classes.clear();
    for (std::uint32_t i = 0; i < c; ++i) classes.push_back(r.string("class_names"));
    scaler_ref = r.string("scaler_ref");
    nn::ThreeLayer<float> p(in, h1, h2, c);
    const char* names[] = {"W1", "b1", "W2", "b2", "W_out", "b_out"};
    auto tensors = p.tensors();
    for (std::size_t t = 0; t < tensors.size(); ++t) r.f32(tensors[t], names[t]);
    r.expect_end();
    return p;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw LoadError("write failed for " + path);
}

}  // namespace detail

inline void save_model(const GcnCheckpoint& ck, const std::string& path) {
    std::ostringstream buf;
    detail::write_three_layer(buf, kGcnMagic, ck.model.params, ck.model.seed, ck.class_names, ck.scaler_ref);
    detail::write_file(path, buf.str());
}

inline GcnCheckpoint load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint " + path);
    binio::Reader r(in, path);
    GcnCheckpoint ck;
    ck.model.params = detail::read_three_layer(r, kGcnMagic, ck.model.seed, ck.class_names, ck.scaler_ref);
    return ck;
}

inline void save_mlp(const MlpCheckpoint& ck, const std::string& path) {
    std::ostringstream buf;
    detail::write_three_layer(buf, kMlpMagic, ck.model.params, ck.model.seed, ck.class_names, ck.scaler_ref);
    detail::write_file(path, buf.str());
}

inline MlpCheckpoint load_mlp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open checkpoint " + path);
    binio::Reader r(in, path);
    MlpCheckpoint ck;
    ck.model.params = detail::read_three_layer(r, kMlpMagic, ck.model.seed, ck.class_names, ck.scaler_ref);
    return ck;
}

}  // namespace semjson
