#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mito/nn/layers.hpp"

namespace mito::nn {

inline constexpr char kWeightsMagic[8] = {'M', 'I', 'T', 'O', 'W', '0', '0', '1'};

/// Writes all named tensors (params + buffers) to a flat binary file:
/// magic, u32 count, then per tensor: u32 name length, name bytes,
/// u64 element count, raw float32 little-endian data.
inline void save_weights(const std::filesystem::path& path,
                         const std::vector<ParamRef>& params,
                         const std::vector<ParamRef>& buffers) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_weights: cannot open " + path.string());
    out.write(kWeightsMagic, sizeof(kWeightsMagic));
    const std::uint32_t count = static_cast<std::uint32_t>(params.size() + buffers.size());
    out.write(reinterpret_cast<const char*>(&count), sizeof(count));
    auto write_one = [&out](const ParamRef& ref) {
        const std::uint32_t len = static_cast<std::uint32_t>(ref.name.size());
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(ref.name.data(), len);
        const std::uint64_t n = ref.value->size();
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        out.write(reinterpret_cast<const char*>(ref.value->data()),
                  static_cast<std::streamsize>(n * sizeof(float)));
    };
    for (const auto& p : params) write_one(p);
    for (const auto& b : buffers) write_one(b);
    if (!out) throw std::runtime_error("save_weights: write failed for " + path.string());
}

/// Loads tensors by name; every name in the file must match a destination
/// ref with the same element count, and vice versa.
inline void load_weights(const std::filesystem::path& path,
                         std::vector<ParamRef>& params,
                         std::vector<ParamRef>& buffers) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_weights: cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kWeightsMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("load_weights: bad magic in " + path.string());
    }
    std::uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), sizeof(count));

    std::vector<ParamRef*> dests;
    for (auto& p : params) dests.push_back(&p);
    for (auto& b : buffers) dests.push_back(&b);
    if (count != dests.size()) {
        throw std::runtime_error("load_weights: tensor count mismatch in " + path.string());
    }
    std::vector<bool> filled(dests.size(), false);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), sizeof(len));
        std::string name(len, '\0');
        in.read(name.data(), len);
        std::uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof(n));
        bool matched = false;
        for (std::size_t d = 0; d < dests.size(); ++d) {
            if (filled[d] || dests[d]->name != name) continue;
            if (dests[d]->value->size() != n) {
                throw std::runtime_error("load_weights: size mismatch for tensor " + name);
            }
            in.read(reinterpret_cast<char*>(dests[d]->value->data()),
                    static_cast<std::streamsize>(n * sizeof(float)));
            filled[d] = true;
            matched = true;
            break;
        }
        if (!matched) throw std::runtime_error("load_weights: unexpected tensor " + name);
        if (!in) throw std::runtime_error("load_weights: truncated file " + path.string());
    }
}

}  // namespace mito::nn
