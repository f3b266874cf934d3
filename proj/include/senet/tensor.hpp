#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "senet/error.hpp"

namespace senet {

using Shape = std::vector<std::int64_t>;

inline std::int64_t numel_of(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

/// Dense row-major array of f32 or f64 scalars. Rank 0 is a scalar.
template <typename T>
class TensorT {
    static_assert(std::is_floating_point_v<T>);

public:
    TensorT() = default;

    explicit TensorT(Shape shape) : shape_(std::move(shape)) {
        for (auto d : shape_) {
            if (d <= 0) throw DimError("nonpositive extent in " + shape_str(shape_));
        }
        data_.assign(static_cast<std::size_t>(numel_of(shape_)), T(0));
    }

    static TensorT full(Shape shape, T v) {
        TensorT t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static TensorT scalar(T v) {
        TensorT t{Shape{}};
        t.data_[0] = v;
        return t;
    }

    static TensorT from(Shape shape, std::vector<T> data) {
        TensorT t;
        t.shape_ = std::move(shape);
        if (static_cast<std::int64_t>(data.size()) != numel_of(t.shape_))
            throw DimError("data length " + std::to_string(data.size()) + " does not match shape " +
                           shape_str(t.shape_));
        t.data_ = std::move(data);
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t dim(std::size_t i) const { return shape_.at(i); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    T operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // 2-d / 3-d / 4-d row-major accessors.
    T& at2(std::int64_t i, std::int64_t j) { return data_[std::size_t(i * shape_[1] + j)]; }
    T at2(std::int64_t i, std::int64_t j) const { return data_[std::size_t(i * shape_[1] + j)]; }
    T& at3(std::int64_t c, std::int64_t y, std::int64_t x) {
        return data_[std::size_t((c * shape_[1] + y) * shape_[2] + x)];
    }
    T at3(std::int64_t c, std::int64_t y, std::int64_t x) const {
        return data_[std::size_t((c * shape_[1] + y) * shape_[2] + x)];
    }
    T& at4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
        return data_[std::size_t(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
    }
    T at4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) const {
        return data_[std::size_t(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
    }

    /// Scalar value of a rank-0 / single-element tensor.
    T value() const {
        if (numel() != 1) throw ContractError("value() on tensor with " + std::to_string(numel()) + " elements");
        return data_[0];
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    TensorT reshaped(Shape new_shape) const {
        if (numel_of(new_shape) != numel())
            throw DimError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape));
        TensorT t;
        t.shape_ = std::move(new_shape);
        t.data_ = data_;
        return t;
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

using TensorF = TensorT<float>;
using TensorD = TensorT<double>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& src) {
    TensorT<To> out(src.shape());
    for (std::int64_t i = 0; i < src.numel(); ++i) out[i] = static_cast<To>(src[i]);
    return out;
}

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* who) {
    if (!a.same_shape(b))
        throw DimError(std::string(who) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

/// Half-pixel-center bilinear resize with edge clamping. Accepts [H,W] or
/// [C,H,W]; this is the single resize routine used everywhere (inputs,
/// ground truth, prediction upsampling).
template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& src, std::int64_t out_h, std::int64_t out_w) {
    if (out_h <= 0 || out_w <= 0) throw DimError("resize target " + std::to_string(out_h) + "x" + std::to_string(out_w));
    if (src.rank() != 2 && src.rank() != 3) throw DimError("resize expects rank 2 or 3, got " + shape_str(src.shape()));
    const std::int64_t channels = src.rank() == 3 ? src.dim(0) : 1;
    const std::int64_t in_h = src.dim(src.rank() == 3 ? 1 : 0);
    const std::int64_t in_w = src.dim(src.rank() == 3 ? 2 : 1);

    Shape out_shape = src.rank() == 3 ? Shape{channels, out_h, out_w} : Shape{out_h, out_w};
    TensorT<T> out(out_shape);

    const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
    const T* in = src.data();
    T* dst = out.data();
    for (std::int64_t y = 0; y < out_h; ++y) {
        const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        std::int64_t y0 = static_cast<std::int64_t>(std::floor(fy));
        const double wy = fy - static_cast<double>(y0);
        const std::int64_t ya = std::clamp<std::int64_t>(y0, 0, in_h - 1);
        const std::int64_t yb = std::clamp<std::int64_t>(y0 + 1, 0, in_h - 1);
        for (std::int64_t x = 0; x < out_w; ++x) {
            const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            std::int64_t x0 = static_cast<std::int64_t>(std::floor(fx));
            const double wx = fx - static_cast<double>(x0);
            const std::int64_t xa = std::clamp<std::int64_t>(x0, 0, in_w - 1);
            const std::int64_t xb = std::clamp<std::int64_t>(x0 + 1, 0, in_w - 1);
            for (std::int64_t c = 0; c < channels; ++c) {
                const T* plane = in + c * in_h * in_w;
                const double v = (1.0 - wy) * ((1.0 - wx) * plane[ya * in_w + xa] + wx * plane[ya * in_w + xb]) +
                                 wy * ((1.0 - wx) * plane[yb * in_w + xa] + wx * plane[yb * in_w + xb]);
                dst[(c * out_h + y) * out_w + x] = static_cast<T>(v);
            }
        }
    }
    return out;
}

/// Nearest-neighbour resize with the same half-pixel-center mapping.
template <typename T>
TensorT<T> resize_nearest(const TensorT<T>& src, std::int64_t out_h, std::int64_t out_w) {
    if (out_h <= 0 || out_w <= 0) throw DimError("resize target " + std::to_string(out_h) + "x" + std::to_string(out_w));
    if (src.rank() != 2 && src.rank() != 3) throw DimError("resize expects rank 2 or 3, got " + shape_str(src.shape()));
    const std::int64_t channels = src.rank() == 3 ? src.dim(0) : 1;
    const std::int64_t in_h = src.dim(src.rank() == 3 ? 1 : 0);
    const std::int64_t in_w = src.dim(src.rank() == 3 ? 2 : 1);
    Shape out_shape = src.rank() == 3 ? Shape{channels, out_h, out_w} : Shape{out_h, out_w};
    TensorT<T> out(out_shape);
    for (std::int64_t y = 0; y < out_h; ++y) {
        const std::int64_t ys = std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::floor((y + 0.5) * in_h / static_cast<double>(out_h))), 0, in_h - 1);
        for (std::int64_t x = 0; x < out_w; ++x) {
            const std::int64_t xs = std::clamp<std::int64_t>(
                static_cast<std::int64_t>(std::floor((x + 0.5) * in_w / static_cast<double>(out_w))), 0, in_w - 1);
            for (std::int64_t c = 0; c < channels; ++c)
                out.data()[(c * out_h + y) * out_w + x] = src.data()[(c * in_h + ys) * in_w + xs];
        }
    }
    return out;
}

template <typename T>
TensorT<T> hflip(const TensorT<T>& src) {
    if (src.rank() != 2 && src.rank() != 3) throw DimError("hflip expects rank 2 or 3");
    const std::int64_t channels = src.rank() == 3 ? src.dim(0) : 1;
    const std::int64_t h = src.dim(src.rank() == 3 ? 1 : 0);
    const std::int64_t w = src.dim(src.rank() == 3 ? 2 : 1);
    TensorT<T> out(src.shape());
    for (std::int64_t c = 0; c < channels; ++c)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x)
                out.data()[(c * h + y) * w + x] = src.data()[(c * h + y) * w + (w - 1 - x)];
    return out;
}

}  // namespace senet
