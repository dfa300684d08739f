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
#include <cmath>
#include <cstdint>
#include <vector>

#include "cfreg/detail/interp.hpp"
#include "cfreg/detail/stencils.hpp"
#include "cfreg/errors.hpp"
#include "cfreg/field_ops.hpp"
#include "cfreg/rng.hpp"
#include "cfreg/tensor.hpp"
#include "cfreg/volume.hpp"

namespace cfreg {

/// Separable Gaussian blur with replicate-edge sampling, applied per channel.
/// `sigma` is per axis in (x, y, z) order.
template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& in, const std::array<double, 3>& sigma) {
    Tensor<T> cur = in;
    std::vector<T> line;
    for (int axis = 0; axis < 3; ++axis) {
        const double s = sigma[axis];
        if (s <= 0) throw ConfigError("gaussian_blur: sigma must be > 0");
        const int r = std::max(1, static_cast<int>(std::ceil(3.0 * s)));
        std::vector<T> kernel(2 * r + 1);
        double norm = 0;
        for (int i = -r; i <= r; ++i) norm += std::exp(-0.5 * i * i / (s * s));
        for (int i = -r; i <= r; ++i)
            kernel[i + r] = static_cast<T>(std::exp(-0.5 * i * i / (s * s)) / norm);
        Tensor<T> next(in.channels(), in.depth(), in.height(), in.width());
        detail::for_each_line(cur, next, axis,
                              [&](const T* src, T* dst, int n, int64_t stride) {
                                  line.assign(n, T(0));
                                  for (int i = 0; i < n; ++i) line[i] = src[i * stride];
                                  for (int i = 0; i < n; ++i) {
                                      T acc = 0;
                                      for (int k = -r; k <= r; ++k)
                                          acc += kernel[k + r] *
                                                 line[detail::clamp_index(i + k, n)];
                                      dst[i * stride] = acc;
                                  }
                              });
        cur = std::move(next);
    }
    return cur;
}

template <typename T>
Tensor<T> gaussian_blur(const Tensor<T>& in, double sigma) {
    return gaussian_blur(in, std::array<double, 3>{sigma, sigma, sigma});
}

namespace detail {

struct Blob {
    std::array<double, 3> center; // (x, y, z) in voxels
    std::array<double, 3> sigma;  // per-axis spread
    double amplitude = 1.0;
};

/// Adds amplitude * exp(-sum((p-c)^2 / 2 sigma^2)) over the blob's support
/// using separable per-axis factors. `track` optionally records, per voxel,
/// the largest unit-amplitude kernel value and which blob produced it.
template <typename T>
void splat_blob(Tensor<T>& vol, const Blob& b, Tensor<float>* best_val = nullptr,
                LabelMap* best_idx = nullptr, int16_t label = 0) {
    const int d = vol.depth(), h = vol.height(), w = vol.width();
    const auto axis_range = [](double c, double s, int n) {
        const int lo = std::max(0, static_cast<int>(std::floor(c - 4.0 * s)));
        const int hi = std::min(n - 1, static_cast<int>(std::ceil(c + 4.0 * s)));
        return std::array<int, 2>{lo, hi};
    };
    const auto rx = axis_range(b.center[0], b.sigma[0], w);
    const auto ry = axis_range(b.center[1], b.sigma[1], h);
    const auto rz = axis_range(b.center[2], b.sigma[2], d);
    std::vector<double> ex(w, 0), ey(h, 0), ez(d, 0);
    for (int x = rx[0]; x <= rx[1]; ++x)
        ex[x] = std::exp(-0.5 * (x - b.center[0]) * (x - b.center[0]) /
                         (b.sigma[0] * b.sigma[0]));
    for (int y = ry[0]; y <= ry[1]; ++y)
        ey[y] = std::exp(-0.5 * (y - b.center[1]) * (y - b.center[1]) /
                         (b.sigma[1] * b.sigma[1]));
    for (int z = rz[0]; z <= rz[1]; ++z)
        ez[z] = std::exp(-0.5 * (z - b.center[2]) * (z - b.center[2]) /
                         (b.sigma[2] * b.sigma[2]));
    for (int z = rz[0]; z <= rz[1]; ++z)
        for (int y = ry[0]; y <= ry[1]; ++y)
            for (int x = rx[0]; x <= rx[1]; ++x) {
                const double k = ez[z] * ey[y] * ex[x];
                vol.at(0, z, y, x) += static_cast<T>(b.amplitude * k);
                if (best_val && k > 0.5 && k > best_val->at(0, z, y, x)) {
                    best_val->at(0, z, y, x) = static_cast<float>(k);
                    best_idx->at(0, z, y, x) = label;
                }
            }
}

} // namespace detail

/// Deterministic synthetic volume: n_blobs labeled anisotropic Gaussian
/// blobs over a bed of broad unlabeled background blobs (so every local
/// window carries intensity gradient), min-max normalized to [0,1]. The
/// label map marks each labeled blob's super-threshold (kernel > 0.5)
/// region, ties resolved by the strongest kernel.
template <typename T>
std::pair<Volume<T>, LabelMap> make_phantom(uint64_t seed,
                                            const std::array<int, 3>& shape,
                                            int n_blobs) {
    const int d = shape[0], h = shape[1], w = shape[2];
    for (int n : shape)
        if (n % 16 != 0 || n <= 0)
            throw ShapeError("make_phantom: dims must be positive and divisible by 16");
    if (n_blobs < 1) throw ConfigError("make_phantom: n_blobs must be >= 1");

    Rng rng(hash_combine(seed, 0x7068616eULL)); // "phan"
    const std::array<double, 3> dims{double(w), double(h), double(d)};

    // Labeled blobs: rejection-sample centers, relaxing the separation
    // requirement if the domain gets crowded (placement always succeeds).
    std::vector<detail::Blob> labeled;
    double sep = 1.25;
    int tries = 0;
    while (static_cast<int>(labeled.size()) < n_blobs) {
        detail::Blob b;
        for (int a = 0; a < 3; ++a) {
            b.center[a] = rng.uniform(0.18 * dims[a], 0.82 * dims[a]);
            b.sigma[a] = rng.uniform(0.045, 0.085) * dims[a];
        }
        b.amplitude = rng.uniform(0.75, 1.0);
        bool ok = true;
        for (const auto& other : labeled) {
            double dist2 = 0;
            for (int a = 0; a < 3; ++a) {
                const double dd = b.center[a] - other.center[a];
                dist2 += dd * dd;
            }
            const double smax = std::max({b.sigma[0], b.sigma[1], b.sigma[2]});
            const double omax = std::max({other.sigma[0], other.sigma[1], other.sigma[2]});
            if (std::sqrt(dist2) < sep * 1.2 * (smax + omax)) {
                ok = false;
                break;
            }
        }
        if (ok) {
            labeled.push_back(b);
        } else if (++tries % 200 == 0) {
            sep *= 0.85;
        }
    }

    Volume<T> vol(1, d, h, w);
    Tensor<float> best_val(1, d, h, w);
    LabelMap labels(1, d, h, w);
    for (int k = 0; k < n_blobs; ++k)
        detail::splat_blob(vol, labeled[k], &best_val, &labels,
                           static_cast<int16_t>(k + 1));

    // Broad unlabeled blobs give the coarse pyramid levels large-scale
    // intensity gradients to align.
    const int n_bg = 6;
    for (int k = 0; k < n_bg; ++k) {
        detail::Blob b;
        for (int a = 0; a < 3; ++a) {
            b.center[a] = rng.uniform(0.0, dims[a]);
            b.sigma[a] = rng.uniform(0.20, 0.38) * dims[a];
        }
        b.amplitude = rng.uniform(0.20, 0.45);
        detail::splat_blob(vol, b);
    }

    // Fine texture: one voxel-scale anisotropic Gaussian kernel per voxel,
    // amplitude drawn from white noise (implemented as a separable blur).
    // Without structure at the correlation-window scale, local NCC barely
    // responds to few-voxel misalignment and registration has no signal.
    Tensor<T> noise(1, d, h, w);
    for (int64_t i = 0; i < noise.size(); ++i) noise[i] = static_cast<T>(rng.normal());
    const std::array<double, 3> tex_sigma{rng.uniform(1.0, 1.6), rng.uniform(1.0, 1.6),
                                          rng.uniform(1.0, 1.6)};
    Tensor<T> texture = gaussian_blur(noise, tex_sigma);
    double tex_var = 0;
    for (int64_t i = 0; i < texture.size(); ++i)
        tex_var += double(texture[i]) * double(texture[i]);
    tex_var /= double(texture.size());
    const double tex_amp = 0.18; // target texture stddev before normalization
    if (tex_var > 0) {
        const T s = static_cast<T>(tex_amp / std::sqrt(tex_var));
        for (int64_t i = 0; i < texture.size(); ++i) vol[i] += s * texture[i];
    }

    return {normalize_intensity(vol), std::move(labels)};
}

/// Deterministic smooth random field: per-component white noise, Gaussian
/// smoothing, then rescaling so the maximum displacement magnitude equals
/// max_disp. Smoothing is increased until the field is fold-free (zero
/// negative Jacobian determinants); failure within the retry budget is a
/// generation error.
template <typename T>
DisplacementField<T> make_smooth_field(uint64_t seed, const std::array<int, 3>& shape,
                                       double max_disp) {
    const int d = shape[0], h = shape[1], w = shape[2];
    if (max_disp <= 0) throw ConfigError("make_smooth_field: max_disp must be > 0");
    if (d < 2 || h < 2 || w < 2)
        throw ShapeError("make_smooth_field: every axis must be >= 2");

    const int max_attempts = 8;
    double sigma = std::max(2.0, std::min({d, h, w}) / 6.0);
    for (int attempt = 0; attempt < max_attempts; ++attempt, sigma *= 1.4) {
        Rng rng(hash_combine(hash_combine(seed, 0x666c64ULL), attempt)); // "fld"
        // Noise is drawn on a grid extended by the blur radius and cropped
        // after smoothing, so edge voxels keep the same statistics as the
        // interior (replicate-edge blur would under-average at corners and
        // the max-based rescale would then crush the interior).
        const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
        Tensor<T> noise(3, d + 2 * r, h + 2 * r, w + 2 * r);
        for (int64_t i = 0; i < noise.size(); ++i)
            noise[i] = static_cast<T>(rng.normal());
        DisplacementField<T> field = crop_center(gaussian_blur(noise, sigma), shape);
        double max_norm = 0;
        const int64_t n = field.spatial_size();
        for (int64_t i = 0; i < n; ++i) {
            const double ux = field[i], uy = field[n + i], uz = field[2 * n + i];
            max_norm = std::max(max_norm, std::sqrt(ux * ux + uy * uy + uz * uz));
        }
        if (max_norm == 0) continue;
        const T scale = static_cast<T>(max_disp / max_norm);
        for (int64_t i = 0; i < field.size(); ++i) field[i] *= scale;
        if (njd_percent(field) == 0.0) return field;
    }
    throw GenerationError("make_smooth_field: could not produce a fold-free field for "
                          "max_disp " + std::to_string(max_disp));
}

} // namespace cfreg
