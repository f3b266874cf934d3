#include "senet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "senet/error.hpp"
#include "senet/image_io.hpp"

namespace senet {

std::string to_string(Task t) { return t == Task::Cod ? "cod" : "sod"; }
std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Task parse_task(const std::string& s) {
    if (s == "cod") return Task::Cod;
    if (s == "sod") return Task::Sod;
    throw ParseError("unknown task tag '" + s + "' (expected cod|sod)");
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "test") return Split::Test;
    throw ParseError("unknown split tag '" + s + "' (expected train|test)");
}

namespace {

// Single octave of lattice value noise sampled with bilinear interpolation.
// cells x cells lattice, wrap-free (lattice has cells+1 knots per side).
class ValueNoise {
public:
    ValueNoise(std::uint64_t seed, int cells) : cells_(cells), knots_(std::size_t((cells + 1) * (cells + 1))) {
        Prng rng(seed);
        for (auto& k : knots_) k = float(rng.uniform());
    }

    float sample(double u, double v) const {  // u,v in [0,1)
        const double fu = u * cells_;
        const double fv = v * cells_;
        const int iu = std::min(int(fu), cells_ - 1);
        const int iv = std::min(int(fv), cells_ - 1);
        const double du = fu - iu, dv = fv - iv;
        const int stride = cells_ + 1;
        const float k00 = knots_[std::size_t(iv * stride + iu)];
        const float k01 = knots_[std::size_t(iv * stride + iu + 1)];
        const float k10 = knots_[std::size_t((iv + 1) * stride + iu)];
        const float k11 = knots_[std::size_t((iv + 1) * stride + iu + 1)];
        return float((1 - dv) * ((1 - du) * k00 + du * k01) + dv * ((1 - du) * k10 + du * k11));
    }

private:
    int cells_;
    std::vector<float> knots_;
};

// Multi-octave value noise field over an s x s grid, normalized to [0,1].
TensorF noise_field(std::uint64_t seed, std::int64_t s, int octaves) {
    TensorF out(Shape{s, s});
    double amp_sum = 0;
    double amp = 1.0;
    for (int o = 0; o < octaves; ++o) {
        const int cells = 4 << o;
        ValueNoise vn(derive_seed(seed, std::uint64_t(o)), cells);
        for (std::int64_t y = 0; y < s; ++y)
            for (std::int64_t x = 0; x < s; ++x)
                out.at2(y, x) += float(amp * vn.sample((x + 0.5) / double(s), (y + 0.5) / double(s)));
        amp_sum += amp;
        amp *= 0.5;
    }
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = float(out[i] / amp_sum);
    return out;
}

struct Ellipse {
    double cx, cy, a, b, cos_t, sin_t;

    bool contains(double x, double y, double scale) const {
        const double dx = x - cx, dy = y - cy;
        const double u = (dx * cos_t + dy * sin_t) / (a * scale);
        const double v = (-dx * sin_t + dy * cos_t) / (b * scale);
        return u * u + v * v <= 1.0;
    }
};

std::int64_t union_area(const std::vector<Ellipse>& blobs, std::int64_t s, double scale) {
    std::int64_t area = 0;
    for (std::int64_t y = 0; y < s; ++y)
        for (std::int64_t x = 0; x < s; ++x)
            for (const auto& e : blobs)
                if (e.contains(x + 0.5, y + 0.5, scale)) {
                    ++area;
                    break;
                }
    return area;
}

}  // namespace

SynthSample generate_sample(const SynthConfig& cfg, std::int64_t index) {
    const std::int64_t s = cfg.size;
    const std::uint64_t sample_seed = derive_seed(cfg.seed, std::uint64_t(index));

    // Background: one independent noise field per channel.
    TensorF image(Shape{3, s, s});
    TensorF bg[3] = {noise_field(derive_seed(sample_seed, "bg_r"), s, cfg.texture_octaves),
                     noise_field(derive_seed(sample_seed, "bg_g"), s, cfg.texture_octaves),
                     noise_field(derive_seed(sample_seed, "bg_b"), s, cfg.texture_octaves)};

    // Target blob: a union of 3..7 ellipses scaled until the mask fraction
    // hits a target drawn from object_scale_range.
    Prng geom(derive_seed(sample_seed, "geom"));
    const int count = 3 + int(geom.next_below(5));
    const double target_frac = geom.uniform(cfg.object_scale_lo, cfg.object_scale_hi);
    const double cx0 = geom.uniform(0.35, 0.65) * double(s);
    const double cy0 = geom.uniform(0.35, 0.65) * double(s);
    std::vector<Ellipse> blobs;
    for (int i = 0; i < count; ++i) {
        Ellipse e;
        e.cx = cx0 + geom.uniform(-0.12, 0.12) * double(s);
        e.cy = cy0 + geom.uniform(-0.12, 0.12) * double(s);
        e.a = geom.uniform(0.04, 0.16) * double(s);
        e.b = geom.uniform(0.04, 0.16) * double(s);
        const double theta = geom.uniform(0.0, 2.0 * std::numbers::pi);
        e.cos_t = std::cos(theta);
        e.sin_t = std::sin(theta);
        blobs.push_back(e);
    }
    const auto target_area = std::int64_t(std::llround(target_frac * double(s) * double(s)));
    double lo = 1e-3, hi = 1.0;
    while (union_area(blobs, s, hi) < target_area && hi < 16.0) hi *= 2.0;
    for (int it = 0; it < 48; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (union_area(blobs, s, mid) < target_area)
            lo = mid;
        else
            hi = mid;
    }
    const double scale = hi;

    TensorF mask(Shape{s, s});
    for (std::int64_t y = 0; y < s; ++y)
        for (std::int64_t x = 0; x < s; ++x)
            for (const auto& e : blobs)
                if (e.contains(x + 0.5, y + 0.5, scale)) {
                    mask.at2(y, x) = 1.0f;
                    break;
                }

    // Contrasting fill color: the value farthest from the mean background
    // in each channel (value noise means hover near one half, so a plain
    // complement would not contrast).
    float mean_bg[3] = {0, 0, 0};
    for (int c = 0; c < 3; ++c) {
        for (std::int64_t i = 0; i < s * s; ++i) mean_bg[c] += bg[c][i];
        mean_bg[c] /= float(s * s);
    }
    const float camo = float(cfg.camo_similarity);
    for (int c = 0; c < 3; ++c) {
        const float contrast = mean_bg[c] < 0.5f ? 1.0f : 0.0f;
        for (std::int64_t y = 0; y < s; ++y)
            for (std::int64_t x = 0; x < s; ++x) {
                const float b = bg[c].at2(y, x);
                image.at3(c, y, x) = mask.at2(y, x) > 0.5f ? camo * b + (1.0f - camo) * contrast : b;
            }
    }
    return {std::move(image), std::move(mask)};
}

void augment_hflip(TensorF& image, TensorF& mask, Prng& rng) {
    if (rng.coin()) {
        image = hflip(image);
        mask = hflip(mask);
    }
}

std::vector<SampleRecord> load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest " + path);
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    std::vector<SampleRecord> records;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const auto tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 4)
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields, got " +
                             std::to_string(fields.size()));
        SampleRecord rec;
        rec.image_path = resolve(fields[0]);
        rec.mask_path = resolve(fields[1]);
        try {
            rec.task = parse_task(fields[2]);
            rec.split = parse_split(fields[3]);
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        for (const auto& p : {rec.image_path, rec.mask_path})
            if (!std::filesystem::exists(p))
                throw IoError(path + ":" + std::to_string(lineno) + ": referenced file missing: " + p);
        records.push_back(std::move(rec));
    }
    return records;
}

void save_manifest(const std::string& path, const std::vector<SampleRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write manifest " + path);
    for (const auto& r : records)
        f << r.image_path << '\t' << r.mask_path << '\t' << to_string(r.task) << '\t' << to_string(r.split) << '\n';
}

std::vector<LoadedSample> load_samples(const std::vector<SampleRecord>& records) {
    std::vector<LoadedSample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        LoadedSample s;
        s.image = read_ppm(r.image_path);
        s.mask = read_pgm(r.mask_path);
        if (s.image.dim(1) != s.mask.dim(0) || s.image.dim(2) != s.mask.dim(1))
            throw DimError("image/mask extents differ for " + r.image_path);
        s.task = r.task;
        s.id = std::filesystem::path(r.image_path).stem().string();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace senet
