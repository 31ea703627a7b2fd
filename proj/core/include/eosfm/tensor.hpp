#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "eosfm/errors.hpp"
#include "eosfm/rng.hpp"

namespace eos {

/// Dense row-major float32 tensor. Shapes use the (batch, channel, y, x)
/// convention for image data.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
    }

    static int64_t numel_of(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, float v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor randn(std::vector<int> s, Rng& rng, float stddev = 1.0f) {
        Tensor t(std::move(s));
        for (auto& x : t.data) x = stddev * rng.normal_f();
        return t;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    float& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    // 4D accessors (b, c, y, x)
    float& at(int b, int c, int y, int x) {
        return data[((static_cast<size_t>(b) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    float at(int b, int c, int y, int x) const {
        return data[((static_cast<size_t>(b) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    // 2D accessors (i, j)
    float& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    float at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    void add_(const Tensor& o) {
        for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    }
    void scale_(float s) {
        for (auto& x : data) x *= s;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }
};

/// FNV-1a over the raw bytes of the tensor payload.
inline uint64_t tensor_hash(const Tensor& t) {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data.data());
    size_t n = t.data.size() * sizeof(float);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    float m = 0.0f;
    for (size_t i = 0; i < a.data.size(); ++i) {
        float d = std::fabs(a.data[i] - b.data[i]);
        if (d > m) m = d;
    }
    return m;
}

inline bool all_finite(const Tensor& t) {
    for (float x : t.data)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace eos
