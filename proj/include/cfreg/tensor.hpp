/*
Copyright 2026 the cfreg contributors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at
    http://www.apache.org/licenses/LICENSE-2.0
Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cfreg/errors.hpp"

namespace cfreg {

/// Dense 4-D array with layout (channels, depth, height, width), width
/// fastest. Volumes use c == 1, displacement fields c == 3 with channel
/// order (ux, uy, uz) where x is the width axis, y the height axis and
/// z the depth axis.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    Tensor(int c, int d, int h, int w)
        : c_(c), d_(d), h_(h), w_(w) {
        if (c < 0 || d < 0 || h < 0 || w < 0)
            throw ShapeError("Tensor: negative dimension");
        data_.assign(static_cast<size_t>(c) * d * h * w, T(0));
    }

    explicit Tensor(const std::array<int, 4>& s) : Tensor(s[0], s[1], s[2], s[3]) {}

    static Tensor full(int c, int d, int h, int w, T value) {
        Tensor t(c, d, h, w);
        std::fill(t.data_.begin(), t.data_.end(), value);
        return t;
    }

    int channels() const { return c_; }
    int depth() const { return d_; }
    int height() const { return h_; }
    int width() const { return w_; }

    std::array<int, 4> shape() const { return {c_, d_, h_, w_}; }
    std::array<int, 3> spatial_shape() const { return {d_, h_, w_}; }

    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    int64_t spatial_size() const { return static_cast<int64_t>(d_) * h_ * w_; }
    bool empty() const { return data_.empty(); }

    bool same_shape(const Tensor& o) const {
        return c_ == o.c_ && d_ == o.d_ && h_ == o.h_ && w_ == o.w_;
    }
    bool same_spatial_shape(const Tensor& o) const {
        return d_ == o.d_ && h_ == o.h_ && w_ == o.w_;
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    int64_t index(int c, int z, int y, int x) const {
        return ((static_cast<int64_t>(c) * d_ + z) * h_ + y) * w_ + x;
    }

    T& at(int c, int z, int y, int x) { return data_[index(c, z, y, x)]; }
    const T& at(int c, int z, int y, int x) const { return data_[index(c, z, y, x)]; }

    T& operator[](int64_t i) { return data_[i]; }
    const T& operator[](int64_t i) const { return data_[i]; }

    /// Pointer to the start of a (c, z, y) row of length width().
    T* row(int c, int z, int y) { return data_.data() + index(c, z, y, 0); }
    const T* row(int c, int z, int y) const { return data_.data() + index(c, z, y, 0); }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    std::string shape_str() const {
        return "(" + std::to_string(c_) + "," + std::to_string(d_) + "," +
               std::to_string(h_) + "," + std::to_string(w_) + ")";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(c_, d_, h_, w_);
        for (int64_t i = 0; i < size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    int c_ = 0, d_ = 0, h_ = 0, w_ = 0;
    std::vector<T> data_;
};

template <typename T>
using Volume = Tensor<T>; // c == 1

using LabelMap = Tensor<int16_t>; // c == 1, non-negative labels, 0 = background

template <typename T>
using DisplacementField = Tensor<T>; // c == 3, components in voxel units

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

template <typename T>
void require_volume(const Tensor<T>& t, const std::string& who) {
    if (t.channels() != 1)
        throw ShapeError(who + ": expected single-channel volume, got " + t.shape_str());
}

template <typename T>
void require_field(const Tensor<T>& t, const std::string& who) {
    if (t.channels() != 3)
        throw ShapeError(who + ": expected 3-channel displacement field, got " + t.shape_str());
}

} // namespace cfreg
