#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "senet/tensor.hpp"

namespace senet {

// Checkpoint container: magic "SENC", little-endian u32 version, u64
// manifest length, a UTF-8 manifest with one "name dtype d0,d1,..." line
// per entry, then the raw little-endian payloads concatenated in manifest
// order. Writing the same entries twice produces byte-identical files.

constexpr std::uint32_t kCheckpointVersion = 1;

struct CkptEntry {
    std::string name;
    std::string dtype;  // f32 | f64 | u64 | str
    Shape shape;        // str payloads use {byte_count}
    std::vector<std::uint8_t> bytes;
};

struct CheckpointFile {
    std::uint32_t version = kCheckpointVersion;
    std::vector<CkptEntry> entries;

    const CkptEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }
};

void write_checkpoint(const std::string& path, const CheckpointFile& ckpt);
CheckpointFile read_checkpoint(const std::string& path);

// entry payload helpers

template <typename T>
CkptEntry tensor_entry(const std::string& name, const TensorT<T>& t) {
    CkptEntry e;
    e.name = name;
    e.dtype = std::is_same_v<T, float> ? "f32" : "f64";
    e.shape = t.shape();
    e.bytes.resize(std::size_t(t.numel()) * sizeof(T));
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        using Bits = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;
        Bits b = std::bit_cast<Bits>(t[i]);
        for (std::size_t k = 0; k < sizeof(T); ++k) e.bytes[std::size_t(i) * sizeof(T) + k] = std::uint8_t(b >> (8 * k));
    }
    return e;
}

template <typename T>
TensorT<T> entry_tensor(const CkptEntry& e) {
    const char* want = std::is_same_v<T, float> ? "f32" : "f64";
    if (e.dtype != want) throw FormatError("entry " + e.name + " has dtype " + e.dtype + ", expected " + want);
    if (e.bytes.size() != std::size_t(numel_of(e.shape)) * sizeof(T)) throw FormatError("entry " + e.name + " payload size");
    TensorT<T> t(e.shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) {
        using Bits = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;
        Bits b = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k) b |= Bits(e.bytes[std::size_t(i) * sizeof(T) + k]) << (8 * k);
        t[i] = std::bit_cast<T>(b);
    }
    return t;
}

CkptEntry u64_entry(const std::string& name, const std::vector<std::uint64_t>& vals);
std::vector<std::uint64_t> entry_u64(const CkptEntry& e);
CkptEntry str_entry(const std::string& name, const std::string& text);
std::string entry_str(const CkptEntry& e);

}  // namespace senet
