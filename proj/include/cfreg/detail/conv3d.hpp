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

#include <array>

#include "cfreg/errors.hpp"
#include "cfreg/tensor.hpp"

// Direct 3x3x3 convolutions, zero padding 1, stride 1 or 2. Weights live in a
// Tensor of shape (Cout*Cin, 3, 3, 3) indexed by co*Cin + ci; bias is
// (Cout, 1, 1, 1). All kernels are sequential and deterministic; the hot
// stride-1 path works on contiguous width rows so the compiler can vectorize.

namespace cfreg::detail {

inline int conv3d_out_dim(int n, int stride) { return (n - 1) / stride + 1; }

template <typename T>
void conv3d_check(const Tensor<T>& in, const Tensor<T>& weight, const Tensor<T>& bias,
                  int stride) {
    if (stride != 1 && stride != 2) throw ShapeError("conv3d: stride must be 1 or 2");
    if (weight.depth() != 3 || weight.height() != 3 || weight.width() != 3)
        throw ShapeError("conv3d: kernel must be 3x3x3");
    if (weight.channels() % in.channels() != 0)
        throw ShapeError("conv3d: weight channels not divisible by input channels");
    const int cout = weight.channels() / in.channels();
    if (bias.channels() != cout || bias.spatial_size() != 1)
        throw ShapeError("conv3d: bias shape mismatch");
}

/// dst[x] += am*src[x-1] + a0*src[x] + ap*src[x+1], zero padding outside.
template <typename T>
void axpy_row_3tap(T* dst, const T* src, int w, T am, T a0, T ap) {
    if (w == 1) {
        dst[0] += a0 * src[0];
        return;
    }
    dst[0] += a0 * src[0] + ap * src[1];
    for (int x = 1; x < w - 1; ++x)
        dst[x] += am * src[x - 1] + a0 * src[x] + ap * src[x + 1];
    dst[w - 1] += am * src[w - 2] + a0 * src[w - 1];
}

/// Stride-2 row: dst[xo] += sum_k a[k]*src[2*xo + k - 1] with zero padding.
template <typename T>
void axpy_row_3tap_s2(T* dst, const T* src, int w_in, int w_out, T am, T a0, T ap) {
    const int xm = w_in / 2; // last xo with 2*xo+1 in range is xm-1
    int x0 = 0;
    if (w_out > 0) {
        dst[0] += a0 * src[0] + (1 < w_in ? ap * src[1] : T(0));
        x0 = 1;
    }
    for (int xo = x0; xo < xm; ++xo)
        dst[xo] += am * src[2 * xo - 1] + a0 * src[2 * xo] + ap * src[2 * xo + 1];
    for (int xo = xm > x0 ? xm : x0; xo < w_out; ++xo) {
        T v = am * src[2 * xo - 1];
        if (2 * xo < w_in) v += a0 * src[2 * xo];
        dst[xo] += v;
    }
}

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& in, const Tensor<T>& weight,
                         const Tensor<T>& bias, int stride) {
    conv3d_check(in, weight, bias, stride);
    const int cin = in.channels(), cout = weight.channels() / cin;
    const int d = in.depth(), h = in.height(), w = in.width();
    const int od = conv3d_out_dim(d, stride), oh = conv3d_out_dim(h, stride),
              ow = conv3d_out_dim(w, stride);
    Tensor<T> out(cout, od, oh, ow);
    for (int co = 0; co < cout; ++co) {
        T* base = out.row(co, 0, 0);
        const T b = bias.at(co, 0, 0, 0);
        for (int64_t i = 0; i < int64_t(od) * oh * ow; ++i) base[i] = b;
        for (int ci = 0; ci < cin; ++ci)
            for (int kz = 0; kz < 3; ++kz)
                for (int ky = 0; ky < 3; ++ky) {
                    const T* wk = weight.row(co * cin + ci, kz, ky);
                    for (int zo = 0; zo < od; ++zo) {
                        const int zi = stride * zo + kz - 1;
                        if (zi < 0 || zi >= d) continue;
                        const int yi0 = ky - 1;
                        for (int yo = 0; yo < oh; ++yo) {
                            const int yi = stride * yo + yi0;
                            if (yi < 0 || yi >= h) continue;
                            T* orow = out.row(co, zo, yo);
                            const T* irow = in.row(ci, zi, yi);
                            if (stride == 1)
                                axpy_row_3tap(orow, irow, w, wk[0], wk[1], wk[2]);
                            else
                                axpy_row_3tap_s2(orow, irow, w, ow, wk[0], wk[1], wk[2]);
                        }
                    }
                }
    }
    return out;
}

/// Gradient w.r.t. the conv input.
template <typename T>
Tensor<T> conv3d_backward_data(const Tensor<T>& weight, const Tensor<T>& grad_out,
                               int cin, int d, int h, int w, int stride) {
    const int cout = weight.channels() / cin;
    const int od = grad_out.depth(), oh = grad_out.height(), ow = grad_out.width();
    Tensor<T> gin(cin, d, h, w);
    if (stride == 1) {
        // Correlation with the flipped kernel: reuse the row update with
        // reversed taps.
        for (int ci = 0; ci < cin; ++ci)
            for (int co = 0; co < cout; ++co)
                for (int kz = 0; kz < 3; ++kz)
                    for (int ky = 0; ky < 3; ++ky) {
                        const T* wk = weight.row(co * cin + ci, kz, ky);
                        for (int zi = 0; zi < d; ++zi) {
                            const int zo = zi + 1 - kz;
                            if (zo < 0 || zo >= od) continue;
                            for (int yi = 0; yi < h; ++yi) {
                                const int yo = yi + 1 - ky;
                                if (yo < 0 || yo >= oh) continue;
                                axpy_row_3tap(gin.row(ci, zi, yi), grad_out.row(co, zo, yo),
                                              w, wk[2], wk[1], wk[0]);
                            }
                        }
                    }
        return gin;
    }
    // Stride 2: scatter each output gradient into the taps it touched.
    for (int co = 0; co < cout; ++co)
        for (int ci = 0; ci < cin; ++ci)
            for (int kz = 0; kz < 3; ++kz)
                for (int ky = 0; ky < 3; ++ky) {
                    const T* wk = weight.row(co * cin + ci, kz, ky);
                    for (int zo = 0; zo < od; ++zo) {
                        const int zi = 2 * zo + kz - 1;
                        if (zi < 0 || zi >= d) continue;
                        for (int yo = 0; yo < oh; ++yo) {
                            const int yi = 2 * yo + ky - 1;
                            if (yi < 0 || yi >= h) continue;
                            T* grow = gin.row(ci, zi, yi);
                            const T* orow = grad_out.row(co, zo, yo);
                            for (int kx = 0; kx < 3; ++kx) {
                                const T wv = wk[kx];
                                const int lo = kx == 0 ? 1 : 0;
                                const int hi = (w - kx) / 2 < ow - 1 ? (w - kx) / 2 : ow - 1;
                                for (int xo = lo; xo <= hi; ++xo)
                                    grow[2 * xo + kx - 1] += wv * orow[xo];
                            }
                        }
                    }
                }
    return gin;
}

/// Gradients w.r.t. weights and bias, accumulated into the provided tensors.
template <typename T>
void conv3d_backward_weights(const Tensor<T>& in, const Tensor<T>& grad_out, int stride,
                             Tensor<T>& grad_weight, Tensor<T>& grad_bias) {
    const int cin = in.channels(), cout = grad_out.channels();
    const int d = in.depth(), h = in.height(), w = in.width();
    const int od = grad_out.depth(), oh = grad_out.height(), ow = grad_out.width();
    for (int co = 0; co < cout; ++co) {
        T bacc = 0;
        const T* base = grad_out.row(co, 0, 0);
        for (int64_t i = 0; i < int64_t(od) * oh * ow; ++i) bacc += base[i];
        grad_bias.at(co, 0, 0, 0) += bacc;
        for (int ci = 0; ci < cin; ++ci)
            for (int kz = 0; kz < 3; ++kz)
                for (int ky = 0; ky < 3; ++ky) {
                    T acc[3] = {0, 0, 0};
                    for (int zo = 0; zo < od; ++zo) {
                        const int zi = stride * zo + kz - 1;
                        if (zi < 0 || zi >= d) continue;
                        for (int yo = 0; yo < oh; ++yo) {
                            const int yi = stride * yo + ky - 1;
                            if (yi < 0 || yi >= h) continue;
                            const T* orow = grad_out.row(co, zo, yo);
                            const T* irow = in.row(ci, zi, yi);
                            if (stride == 1) {
                                T a0 = 0, a1 = 0, a2 = 0;
                                for (int x = 1; x < w; ++x) a0 += orow[x] * irow[x - 1];
                                for (int x = 0; x < w; ++x) a1 += orow[x] * irow[x];
                                for (int x = 0; x < w - 1; ++x) a2 += orow[x] * irow[x + 1];
                                acc[0] += a0;
                                acc[1] += a1;
                                acc[2] += a2;
                            } else {
                                for (int kx = 0; kx < 3; ++kx) {
                                    const int lo = kx == 0 ? 1 : 0;
                                    const int hi =
                                        (w - kx) / 2 < ow - 1 ? (w - kx) / 2 : ow - 1;
                                    T a = 0;
                                    for (int xo = lo; xo <= hi; ++xo)
                                        a += orow[xo] * irow[2 * xo + kx - 1];
                                    acc[kx] += a;
                                }
                            }
                        }
                    }
                    T* gw = grad_weight.row(co * cin + ci, kz, ky);
                    gw[0] += acc[0];
                    gw[1] += acc[1];
                    gw[2] += acc[2];
                }
    }
}

} // namespace cfreg::detail
