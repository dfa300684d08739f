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

#include <cmath>

#include "cfreg/detail/resample.hpp"
#include "cfreg/errors.hpp"
#include "cfreg/tensor.hpp"

namespace cfreg {

/// I_m o phi: resample `vol` at p + u(p) with trilinear interpolation.
/// A zero field reproduces the input bit-exactly.
template <typename T>
Tensor<T> warp_trilinear(const Tensor<T>& vol, const Tensor<T>& field) {
    require_field(field, "warp_trilinear");
    if (!vol.same_spatial_shape(field))
        throw ShapeError("warp_trilinear: volume " + vol.shape_str() + " vs field " +
                         field.shape_str());
    return detail::warp_forward(vol, field);
}

/// Label warp with nearest-neighbor sampling; the output label set is a
/// subset of the input's.
template <typename T>
LabelMap warp_nearest(const LabelMap& labels, const Tensor<T>& field) {
    require_field(field, "warp_nearest");
    if (labels.depth() != field.depth() || labels.height() != field.height() ||
        labels.width() != field.width())
        throw ShapeError("warp_nearest: labels " + labels.shape_str() + " vs field " +
                         field.shape_str());
    const int D = labels.depth(), H = labels.height(), W = labels.width();
    LabelMap out(1, D, H, W);
    for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const int sx = detail::clamp_index(
                    static_cast<int>(std::lround(T(x) + field.at(0, z, y, x))), W);
                const int sy = detail::clamp_index(
                    static_cast<int>(std::lround(T(y) + field.at(1, z, y, x))), H);
                const int sz = detail::clamp_index(
                    static_cast<int>(std::lround(T(z) + field.at(2, z, y, x))), D);
                out.at(0, z, y, x) = labels.at(0, sz, sy, sx);
            }
    return out;
}

/// Upsample a field to twice the resolution and double its values so
/// displacements stay correct in the finer grid's voxel units.
template <typename T>
Tensor<T> upsample_field_2x(const Tensor<T>& field) {
    require_field(field, "upsample_field_2x");
    Tensor<T> out = detail::upsample2x_forward(field);
    for (int64_t i = 0; i < out.size(); ++i) out[i] *= T(2);
    return out;
}

template <typename T>
Tensor<T> add_fields(const Tensor<T>& a, const Tensor<T>& b) {
    require_field(a, "add_fields");
    if (!a.same_shape(b))
        throw ShapeError("add_fields: " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> out = a;
    for (int64_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

namespace detail {

/// Forward-difference partials of one field channel, backward difference on
/// the last slice of each axis. axis: 0 = x (width), 1 = y, 2 = z.
template <typename T>
T field_partial(const Tensor<T>& f, int ch, int z, int y, int x, int axis) {
    const int n = axis == 0 ? f.width() : (axis == 1 ? f.height() : f.depth());
    const int i = axis == 0 ? x : (axis == 1 ? y : z);
    const int lo = i == n - 1 ? i - 1 : i;
    const int hi = lo + 1;
    switch (axis) {
        case 0: return f.at(ch, z, y, hi) - f.at(ch, z, y, lo);
        case 1: return f.at(ch, z, hi, x) - f.at(ch, z, lo, x);
        default: return f.at(ch, hi, y, x) - f.at(ch, lo, y, x);
    }
}

} // namespace detail

/// det(J_phi) per voxel where J_phi = I + du/dp in voxel units. Zero and
/// constant fields yield exactly 1 everywhere.
template <typename T>
Tensor<T> jacobian_determinants(const Tensor<T>& field) {
    require_field(field, "jacobian_determinants");
    for (int n : field.spatial_shape())
        if (n < 2) throw ShapeError("jacobian_determinants: every axis must be >= 2");
    const int D = field.depth(), H = field.height(), W = field.width();
    Tensor<T> det(1, D, H, W);
    for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                T a[3][3];
                for (int r = 0; r < 3; ++r)
                    for (int c = 0; c < 3; ++c)
                        a[r][c] = detail::field_partial(field, r, z, y, x, c);
                a[0][0] += T(1);
                a[1][1] += T(1);
                a[2][2] += T(1);
                det.at(0, z, y, x) = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
            }
    return det;
}

/// Percentage (0..100) of voxels with non-positive Jacobian determinant.
template <typename T>
double njd_percent(const Tensor<T>& field) {
    const Tensor<T> det = jacobian_determinants(field);
    int64_t bad = 0;
    for (int64_t i = 0; i < det.size(); ++i)
        if (det[i] <= T(0)) ++bad;
    return 100.0 * static_cast<double>(bad) / static_cast<double>(det.size());
}

} // namespace cfreg
