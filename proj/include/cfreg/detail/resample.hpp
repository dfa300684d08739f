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

#include <vector>

#include "cfreg/detail/interp.hpp"
#include "cfreg/tensor.hpp"

namespace cfreg::detail {

/// Per-axis taps for the x2 trilinear upsampling. Output coordinate o maps
/// to input coordinate o/2 - 0.25 (the inverse of the half-pixel-centered
/// downsampling convention), clamped at the edges.
template <typename T>
std::vector<LinearTap<T>> upsample2x_taps(int n_in) {
    std::vector<LinearTap<T>> taps(2 * n_in);
    for (int o = 0; o < 2 * n_in; ++o)
        taps[o] = linear_tap(T(0.5) * o - T(0.25), n_in);
    return taps;
}

/// Trilinear upsample by 2 along every spatial axis (values unchanged).
template <typename T>
Tensor<T> upsample2x_forward(const Tensor<T>& in) {
    const int C = in.channels(), D = in.depth(), H = in.height(), W = in.width();
    const auto tz = upsample2x_taps<T>(D), ty = upsample2x_taps<T>(H), tx = upsample2x_taps<T>(W);
    Tensor<T> out(C, 2 * D, 2 * H, 2 * W);
    for (int c = 0; c < C; ++c)
        for (int z = 0; z < 2 * D; ++z)
            for (int y = 0; y < 2 * H; ++y) {
                const T* r00 = in.row(c, tz[z].i0, ty[y].i0);
                const T* r01 = in.row(c, tz[z].i0, ty[y].i1);
                const T* r10 = in.row(c, tz[z].i1, ty[y].i0);
                const T* r11 = in.row(c, tz[z].i1, ty[y].i1);
                const T wzy00 = tz[z].w0 * ty[y].w0, wzy01 = tz[z].w0 * ty[y].w1;
                const T wzy10 = tz[z].w1 * ty[y].w0, wzy11 = tz[z].w1 * ty[y].w1;
                T* orow = out.row(c, z, y);
                for (int x = 0; x < 2 * W; ++x) {
                    const auto& t = tx[x];
                    const T a = r00[t.i0] * t.w0 + r00[t.i1] * t.w1;
                    const T b = r01[t.i0] * t.w0 + r01[t.i1] * t.w1;
                    const T cc = r10[t.i0] * t.w0 + r10[t.i1] * t.w1;
                    const T dd = r11[t.i0] * t.w0 + r11[t.i1] * t.w1;
                    orow[x] = a * wzy00 + b * wzy01 + cc * wzy10 + dd * wzy11;
                }
            }
    return out;
}

/// Adjoint of upsample2x_forward: scatters fine-grid gradients back onto the
/// coarse grid with the same tap weights.
template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad_out, int D, int H, int W) {
    const int C = grad_out.channels();
    const auto tz = upsample2x_taps<T>(D), ty = upsample2x_taps<T>(H), tx = upsample2x_taps<T>(W);
    Tensor<T> grad_in(C, D, H, W);
    for (int c = 0; c < C; ++c)
        for (int z = 0; z < 2 * D; ++z)
            for (int y = 0; y < 2 * H; ++y) {
                const T* grow = grad_out.row(c, z, y);
                T* g00 = grad_in.row(c, tz[z].i0, ty[y].i0);
                T* g01 = grad_in.row(c, tz[z].i0, ty[y].i1);
                T* g10 = grad_in.row(c, tz[z].i1, ty[y].i0);
                T* g11 = grad_in.row(c, tz[z].i1, ty[y].i1);
                const T wzy00 = tz[z].w0 * ty[y].w0, wzy01 = tz[z].w0 * ty[y].w1;
                const T wzy10 = tz[z].w1 * ty[y].w0, wzy11 = tz[z].w1 * ty[y].w1;
                for (int x = 0; x < 2 * W; ++x) {
                    const auto& t = tx[x];
                    const T g = grow[x];
                    g00[t.i0] += g * wzy00 * t.w0; g00[t.i1] += g * wzy00 * t.w1;
                    g01[t.i0] += g * wzy01 * t.w0; g01[t.i1] += g * wzy01 * t.w1;
                    g10[t.i0] += g * wzy10 * t.w0; g10[t.i1] += g * wzy10 * t.w1;
                    g11[t.i0] += g * wzy11 * t.w0; g11[t.i1] += g * wzy11 * t.w1;
                }
            }
    return grad_in;
}

/// Backward warp: out(c, p) = img(c, p + u(p)) with trilinear sampling and
/// edge-clamped coordinates. Field channels are (ux, uy, uz) in voxel units.
template <typename T>
Tensor<T> warp_forward(const Tensor<T>& img, const Tensor<T>& field) {
    Tensor<T> out(img.channels(), img.depth(), img.height(), img.width());
    const int D = img.depth(), H = img.height(), W = img.width();
    for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const T cx = T(x) + field.at(0, z, y, x);
                const T cy = T(y) + field.at(1, z, y, x);
                const T cz = T(z) + field.at(2, z, y, x);
                for (int c = 0; c < img.channels(); ++c)
                    out.at(c, z, y, x) = sample_trilinear(img, c, cx, cy, cz);
            }
    return out;
}

/// d(warp)/d(field). Derivative of the clamped sample w.r.t. a coordinate is
/// zero where the coordinate is clamped (outside [0, n-1]).
template <typename T>
Tensor<T> warp_backward_field(const Tensor<T>& img, const Tensor<T>& field,
                              const Tensor<T>& grad_out) {
    const int D = img.depth(), H = img.height(), W = img.width();
    Tensor<T> gf(3, D, H, W);
    for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const T cx = T(x) + field.at(0, z, y, x);
                const T cy = T(y) + field.at(1, z, y, x);
                const T cz = T(z) + field.at(2, z, y, x);
                const bool in_x = cx > T(0) && cx < T(W - 1);
                const bool in_y = cy > T(0) && cy < T(H - 1);
                const bool in_z = cz > T(0) && cz < T(D - 1);
                const auto tx = linear_tap(cx, W);
                const auto ty = linear_tap(cy, H);
                const auto tz = linear_tap(cz, D);
                T gx = 0, gy = 0, gz = 0;
                for (int c = 0; c < img.channels(); ++c) {
                    const T g = grad_out.at(c, z, y, x);
                    if (g == T(0)) continue;
                    const T v000 = img.at(c, tz.i0, ty.i0, tx.i0);
                    const T v001 = img.at(c, tz.i0, ty.i0, tx.i1);
                    const T v010 = img.at(c, tz.i0, ty.i1, tx.i0);
                    const T v011 = img.at(c, tz.i0, ty.i1, tx.i1);
                    const T v100 = img.at(c, tz.i1, ty.i0, tx.i0);
                    const T v101 = img.at(c, tz.i1, ty.i0, tx.i1);
                    const T v110 = img.at(c, tz.i1, ty.i1, tx.i0);
                    const T v111 = img.at(c, tz.i1, ty.i1, tx.i1);
                    if (in_x)
                        gx += g * (((v001 - v000) * ty.w0 + (v011 - v010) * ty.w1) * tz.w0 +
                                   ((v101 - v100) * ty.w0 + (v111 - v110) * ty.w1) * tz.w1);
                    if (in_y)
                        gy += g * (((v010 - v000) * tx.w0 + (v011 - v001) * tx.w1) * tz.w0 +
                                   ((v110 - v100) * tx.w0 + (v111 - v101) * tx.w1) * tz.w1);
                    if (in_z)
                        gz += g * (((v100 - v000) * tx.w0 + (v101 - v001) * tx.w1) * ty.w0 +
                                   ((v110 - v010) * tx.w0 + (v111 - v011) * tx.w1) * ty.w1);
                }
                gf.at(0, z, y, x) = gx;
                gf.at(1, z, y, x) = gy;
                gf.at(2, z, y, x) = gz;
            }
    return gf;
}

/// d(warp)/d(img): scatter of the 8 corner weights.
template <typename T>
Tensor<T> warp_backward_image(const Tensor<T>& field, const Tensor<T>& grad_out,
                              int C, int D, int H, int W) {
    Tensor<T> gi(C, D, H, W);
    for (int z = 0; z < grad_out.depth(); ++z)
        for (int y = 0; y < grad_out.height(); ++y)
            for (int x = 0; x < grad_out.width(); ++x) {
                const T cx = T(x) + field.at(0, z, y, x);
                const T cy = T(y) + field.at(1, z, y, x);
                const T cz = T(z) + field.at(2, z, y, x);
                const auto tx = linear_tap(cx, W);
                const auto ty = linear_tap(cy, H);
                const auto tz = linear_tap(cz, D);
                for (int c = 0; c < C; ++c) {
                    const T g = grad_out.at(c, z, y, x);
                    if (g == T(0)) continue;
                    gi.at(c, tz.i0, ty.i0, tx.i0) += g * tz.w0 * ty.w0 * tx.w0;
                    gi.at(c, tz.i0, ty.i0, tx.i1) += g * tz.w0 * ty.w0 * tx.w1;
                    gi.at(c, tz.i0, ty.i1, tx.i0) += g * tz.w0 * ty.w1 * tx.w0;
                    gi.at(c, tz.i0, ty.i1, tx.i1) += g * tz.w0 * ty.w1 * tx.w1;
                    gi.at(c, tz.i1, ty.i0, tx.i0) += g * tz.w1 * ty.w0 * tx.w0;
                    gi.at(c, tz.i1, ty.i0, tx.i1) += g * tz.w1 * ty.w0 * tx.w1;
                    gi.at(c, tz.i1, ty.i1, tx.i0) += g * tz.w1 * ty.w1 * tx.w0;
                    gi.at(c, tz.i1, ty.i1, tx.i1) += g * tz.w1 * ty.w1 * tx.w1;
                }
            }
    return gi;
}

} // namespace cfreg::detail
