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
#include <cmath>

#include "cfreg/tensor.hpp"

namespace cfreg::detail {

inline int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

template <typename T>
T clamp_coord(T c, int n) {
    if (c < T(0)) return T(0);
    T hi = T(n - 1);
    return c > hi ? hi : c;
}

/// One axis of a trilinear sample: two integer taps and their weights.
/// Coordinates are clamped to [0, n-1] before decomposition, so taps are
/// always valid indices.
template <typename T>
struct LinearTap {
    int i0, i1;
    T w0, w1;
};

template <typename T>
LinearTap<T> linear_tap(T coord, int n) {
    T c = clamp_coord(coord, n);
    int i0 = static_cast<int>(std::floor(c));
    if (i0 > n - 2) i0 = n - 2; // keeps i1 valid; exact only when c == n-1
    if (i0 < 0) i0 = 0;
    if (n == 1) return {0, 0, T(1), T(0)};
    T f = c - static_cast<T>(i0);
    return {i0, i0 + 1, T(1) - f, f};
}

/// Trilinear sample of channel `ch` at continuous voxel coordinate
/// (x, y, z), x along width. Out-of-domain coordinates clamp to the edge.
template <typename T>
T sample_trilinear(const Tensor<T>& vol, int ch, T x, T y, T z) {
    const auto tx = linear_tap(x, vol.width());
    const auto ty = linear_tap(y, vol.height());
    const auto tz = linear_tap(z, vol.depth());
    const T v000 = vol.at(ch, tz.i0, ty.i0, tx.i0);
    const T v001 = vol.at(ch, tz.i0, ty.i0, tx.i1);
    const T v010 = vol.at(ch, tz.i0, ty.i1, tx.i0);
    const T v011 = vol.at(ch, tz.i0, ty.i1, tx.i1);
    const T v100 = vol.at(ch, tz.i1, ty.i0, tx.i0);
    const T v101 = vol.at(ch, tz.i1, ty.i0, tx.i1);
    const T v110 = vol.at(ch, tz.i1, ty.i1, tx.i0);
    const T v111 = vol.at(ch, tz.i1, ty.i1, tx.i1);
    const T c00 = v000 * tx.w0 + v001 * tx.w1;
    const T c01 = v010 * tx.w0 + v011 * tx.w1;
    const T c10 = v100 * tx.w0 + v101 * tx.w1;
    const T c11 = v110 * tx.w0 + v111 * tx.w1;
    return (c00 * ty.w0 + c01 * ty.w1) * tz.w0 + (c10 * ty.w0 + c11 * ty.w1) * tz.w1;
}

} // namespace cfreg::detail
