#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "senet/rng.hpp"
#include "senet/tensor.hpp"

namespace senet {

enum class Task { Cod, Sod };
enum class Split { Train, Test };

std::string to_string(Task t);
std::string to_string(Split s);
Task parse_task(const std::string& s);
Split parse_split(const std::string& s);

struct SampleRecord {
    std::string image_path;
    std::string mask_path;
    Task task = Task::Cod;
    Split split = Split::Train;
};

/// Synthetic sample generator configuration. Generation is a pure function
/// of (config, sample index): regenerating a dataset bit-identically only
/// needs the same config.
struct SynthConfig {
    std::int64_t size = 64;
    std::uint64_t seed = 0;
    Task mode = Task::Cod;
    double object_scale_lo = 0.01;  // fraction of image area
    double object_scale_hi = 0.3;
    int texture_octaves = 4;
    double camo_similarity = 0.9;  // 0.9 for cod, 0.1 for sod

    static SynthConfig for_mode(Task mode, std::int64_t size, std::uint64_t seed) {
        SynthConfig c;
        c.mode = mode;
        c.size = size;
        c.seed = seed;
        c.camo_similarity = mode == Task::Cod ? 0.9 : 0.1;
        return c;
    }
};

struct SynthSample {
    TensorF image;  // [3,s,s] in [0,1]
    TensorF mask;   // [s,s] in {0,1}
};

/// Value-noise background plus an ellipse-union target whose fill blends
/// the local background texture (weight camo_similarity) with a contrasting
/// color. The mask is the exact target region.
SynthSample generate_sample(const SynthConfig& cfg, std::int64_t index);

/// Flips image and mask together about the vertical axis with p = 0.5.
void augment_hflip(TensorF& image, TensorF& mask, Prng& rng);

/// Tab-separated records: image_path, mask_path, task (cod|sod),
/// split (train|test). Relative paths are resolved against the manifest's
/// directory. Order is preserved exactly.
std::vector<SampleRecord> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<SampleRecord>& records);

struct LoadedSample {
    TensorF image;  // [3,H,W]
    TensorF mask;   // [H,W]
    Task task = Task::Cod;
    std::string id;
};

/// Reads and validates every record (decode + extent agreement).
std::vector<LoadedSample> load_samples(const std::vector<SampleRecord>& records);

}  // namespace senet
