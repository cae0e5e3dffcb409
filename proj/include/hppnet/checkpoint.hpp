#ifndef HPPNET_CHECKPOINT_HPP
#define HPPNET_CHECKPOINT_HPP

#include "hppnet/tensor.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

namespace hppnet {

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

template <typename S>
struct Parameter {
    std::string name;
    Tensor<S> tensor; // requires_grad = true
};

constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u16(std::ostream& os, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}
inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}
inline uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}
inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0] | (b[1] << 8) | (b[2] << 16) | (uint32_t(b[3]) << 24));
}

} // namespace detail

// File layout: "HPPN", version u32, count u32, then per parameter:
// name length u16, UTF-8 name, rank u8, extents u32 each, raw little-endian
// 32-bit floats.
//
// Values are stored in 32-bit precision; saving rounds the live parameters to
// that precision too, so a save -> load -> forward sequence reproduces the
// post-save forward bit for bit.
template <typename S>
void save_checkpoint(std::vector<Parameter<S>>& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write("HPPN", 4);
    detail::put_u32(os, kCheckpointVersion);
    detail::put_u32(os, static_cast<uint32_t>(params.size()));
    for (auto& p : params) {
        if (p.name.size() > 0xffff) throw IoError("parameter name too long: " + p.name);
        detail::put_u16(os, static_cast<uint16_t>(p.name.size()));
        os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const auto& shape = p.tensor.shape();
        const unsigned char rank = static_cast<unsigned char>(shape.size());
        os.write(reinterpret_cast<const char*>(&rank), 1);
        for (int64_t e : shape) detail::put_u32(os, static_cast<uint32_t>(e));
        S* data = p.tensor.mutable_data();
        for (int64_t i = 0; i < p.tensor.size(); ++i) {
            const float f = static_cast<float>(data[i]);
            data[i] = static_cast<S>(f);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            detail::put_u32(os, bits);
        }
    }
    if (!os) throw IoError("write failure on checkpoint: " + path);
}

// Loads into an existing parameter list; names and shapes must match exactly.
template <typename S>
void load_checkpoint(std::vector<Parameter<S>>& params, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "HPPN", 4) != 0)
        throw FormatError("not a checkpoint file (bad magic): " + path);
    const uint32_t version = detail::get_u32(is);
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint version " + std::to_string(version) + " unsupported (expect " +
                          std::to_string(kCheckpointVersion) + "): " + path);
    const uint32_t count = detail::get_u32(is);
    if (count != params.size())
        throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, model expects " +
                          std::to_string(params.size()));
    for (auto& p : params) {
        const uint16_t len = detail::get_u16(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (name != p.name)
            throw FormatError("checkpoint parameter '" + name + "' does not match model parameter '" +
                              p.name + "'");
        unsigned char rank = 0;
        is.read(reinterpret_cast<char*>(&rank), 1);
        Shape shape(rank);
        for (auto& e : shape) e = detail::get_u32(is);
        if (shape != p.tensor.shape())
            throw FormatError("checkpoint shape " + shape_str(shape) + " for '" + name +
                              "' does not match model shape " + shape_str(p.tensor.shape()));
        S* data = p.tensor.mutable_data();
        for (int64_t i = 0; i < p.tensor.size(); ++i) {
            const uint32_t bits = detail::get_u32(is);
            float f;
            std::memcpy(&f, &bits, 4);
            data[i] = static_cast<S>(f);
        }
        if (!is) throw FormatError("truncated checkpoint: " + path);
    }
}

} // namespace hppnet

#endif
