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

#include <cstdint>

#include "cfreg/errors.hpp"
#include "cfreg/tensor.hpp"

namespace cfreg::detail {

/// Runs `fn(in_line, out_line, count, stride)` over every 1-D line of the
/// tensor along `axis` (0 = x, 1 = y, 2 = z).
template <typename T, typename Fn>
void for_each_line(const Tensor<T>& in, Tensor<T>& out, int axis, Fn&& fn) {
    const int c = in.channels(), d = in.depth(), h = in.height(), w = in.width();
    const int64_t sy = w, sz = int64_t(h) * w;
    if (axis == 0) {
        for (int ci = 0; ci < c; ++ci)
            for (int z = 0; z < d; ++z)
                for (int y = 0; y < h; ++y)
                    fn(in.row(ci, z, y), out.row(ci, z, y), w, int64_t(1));
    } else if (axis == 1) {
        for (int ci = 0; ci < c; ++ci)
            for (int z = 0; z < d; ++z)
                for (int x = 0; x < w; ++x)
                    fn(in.row(ci, z, 0) + x, out.row(ci, z, 0) + x, h, sy);
    } else {
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    fn(in.row(ci, 0, y) + x, out.row(ci, 0, y) + x, d, sz);
    }
}

/// Forward difference along `axis`; the last element of each line reuses the
/// preceding (backward) difference so the stencil matches the Jacobian's.
template <typename T>
Tensor<T> axis_diff_forward(const Tensor<T>& in, int axis) {
    Tensor<T> out(in.channels(), in.depth(), in.height(), in.width());
    for_each_line(in, out, axis, [](const T* a, T* b, int n, int64_t s) {
        if (n == 1) {
            b[0] = 0;
            return;
        }
        for (int i = 0; i < n - 1; ++i) b[i * s] = a[(i + 1) * s] - a[i * s];
        b[(n - 1) * s] = a[(n - 1) * s] - a[(n - 2) * s];
    });
    return out;
}

/// Adjoint of axis_diff_forward applied to an upstream gradient.
template <typename T>
Tensor<T> axis_diff_backward(const Tensor<T>& grad_out, int axis) {
    Tensor<T> out(grad_out.channels(), grad_out.depth(), grad_out.height(),
                  grad_out.width());
    for_each_line(grad_out, out, axis, [](const T* g, T* b, int n, int64_t s) {
        if (n == 1) {
            b[0] = 0;
            return;
        }
        const T last = g[(n - 1) * s];
        for (int j = 0; j < n; ++j) {
            T acc = 0;
            if (j < n - 1) acc -= g[j * s];
            if (j >= 1) acc += g[(j - 1) * s];
            if (j == n - 1) acc += last;
            if (j == n - 2) acc -= last;
            b[j * s] = acc;
        }
    });
    return out;
}

/// Sliding-window sum with zero padding, separable over x, y, z. The window
/// is symmetric (odd size), so the operator is its own adjoint.
template <typename T>
Tensor<T> box_sum(const Tensor<T>& in, int window) {
    if (window < 1 || window % 2 == 0)
        throw ShapeError("box_sum: window must be odd and positive");
    const int r = window / 2;
    const int c = in.channels(), d = in.depth(), h = in.height(), w = in.width();
    Tensor<T> a(c, d, h, w), b(c, d, h, w);
    // x pass: direct taps per row.
    for (int ci = 0; ci < c; ++ci)
        for (int z = 0; z < d; ++z)
            for (int y = 0; y < h; ++y) {
                const T* src = in.row(ci, z, y);
                T* dst = a.row(ci, z, y);
                for (int x = 0; x < w; ++x) {
                    const int lo = x - r > 0 ? x - r : 0;
                    const int hi = x + r < w - 1 ? x + r : w - 1;
                    T s = 0;
                    for (int j = lo; j <= hi; ++j) s += src[j];
                    dst[x] = s;
                }
            }
    // y pass: each output row is a sum of neighboring input rows.
    for (int ci = 0; ci < c; ++ci)
        for (int z = 0; z < d; ++z)
            for (int y = 0; y < h; ++y) {
                const int lo = y - r > 0 ? y - r : 0;
                const int hi = y + r < h - 1 ? y + r : h - 1;
                T* dst = b.row(ci, z, y);
                for (int x = 0; x < w; ++x) dst[x] = 0;
                for (int j = lo; j <= hi; ++j) {
                    const T* src = a.row(ci, z, j);
                    for (int x = 0; x < w; ++x) dst[x] += src[x];
                }
            }
    // z pass.
    for (int ci = 0; ci < c; ++ci)
        for (int z = 0; z < d; ++z) {
            const int lo = z - r > 0 ? z - r : 0;
            const int hi = z + r < d - 1 ? z + r : d - 1;
            for (int y = 0; y < h; ++y) {
                T* dst = a.row(ci, z, y);
                for (int x = 0; x < w; ++x) dst[x] = 0;
                for (int j = lo; j <= hi; ++j) {
                    const T* src = b.row(ci, j, y);
                    for (int x = 0; x < w; ++x) dst[x] += src[x];
                }
            }
        }
    return a;
}

} // namespace cfreg::detail
