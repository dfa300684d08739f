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
#include <vector>

#include "cfreg/detail/interp.hpp"
#include "cfreg/errors.hpp"
#include "cfreg/tensor.hpp"

namespace cfreg {

/// Min-max rescale to [0, 1]. The minimum maps to 0 and the maximum to 1.
template <typename T>
Tensor<T> normalize_intensity(const Tensor<T>& vol) {
    if (vol.empty()) throw ShapeError("normalize_intensity: empty volume");
    T lo = vol[0], hi = vol[0];
    for (int64_t i = 1; i < vol.size(); ++i) {
        lo = std::min(lo, vol[i]);
        hi = std::max(hi, vol[i]);
    }
    if (!(hi > lo))
        throw DegenerateInputError("normalize_intensity: constant volume");
    Tensor<T> out(vol.channels(), vol.depth(), vol.height(), vol.width());
    const T scale = T(1) / (hi - lo);
    for (int64_t i = 0; i < vol.size(); ++i) out[i] = (vol[i] - lo) * scale;
    return out;
}

/// Halve every spatial axis by trilinear resampling. Output voxel o reads
/// the input at coordinate 2*o + 0.5 per axis (half-pixel-centered mapping
/// with edge clamping), which for even dims reduces to a 2x2x2 mean.
template <typename T>
Tensor<T> downsample_half(const Tensor<T>& vol) {
    const int D = vol.depth(), H = vol.height(), W = vol.width();
    if (D % 2 || H % 2 || W % 2)
        throw ShapeError("downsample_half: odd axis size in " + vol.shape_str());
    Tensor<T> out(vol.channels(), D / 2, H / 2, W / 2);
    for (int c = 0; c < vol.channels(); ++c)
        for (int z = 0; z < D / 2; ++z)
            for (int y = 0; y < H / 2; ++y) {
                T* orow = out.row(c, z, y);
                for (int x = 0; x < W / 2; ++x)
                    orow[x] = detail::sample_trilinear(vol, c, T(2 * x) + T(0.5),
                                                       T(2 * y) + T(0.5), T(2 * z) + T(0.5));
            }
    return out;
}

/// L volumes at scales 0.5^(L-i); levels[L-1] is the original volume.
template <typename T>
struct ImagePyramid {
    std::vector<Tensor<T>> levels;
    int num_levels() const { return static_cast<int>(levels.size()); }
    /// 1-based access matching the registration step index.
    const Tensor<T>& level(int i) const { return levels[i - 1]; }
};

template <typename T>
ImagePyramid<T> build_pyramid(const Tensor<T>& vol, int L) {
    if (L < 1 || L > 5)
        throw ConfigError("build_pyramid: L must be in [1,5], got " + std::to_string(L));
    const int divisor = 1 << (L - 1);
    for (int n : vol.spatial_shape())
        if (n % divisor)
            throw ShapeError("build_pyramid: dims " + vol.shape_str() +
                             " not divisible by " + std::to_string(divisor));
    ImagePyramid<T> pyr;
    pyr.levels.resize(L);
    pyr.levels[L - 1] = vol;
    for (int i = L - 1; i >= 1; --i)
        pyr.levels[i - 1] = downsample_half(pyr.levels[i]);
    return pyr;
}

/// Edge-replicating pad of the spatial axes up to `target` (centered low
/// side first). Used by the CLI to meet the divisible-by-16 input contract.
template <typename T>
Tensor<T> pad_replicate(const Tensor<T>& t, std::array<int, 3> target) {
    const int D = t.depth(), H = t.height(), W = t.width();
    const int td = target[0], th = target[1], tw = target[2];
    if (td < D || th < H || tw < W) throw ShapeError("pad_replicate: target smaller than input");
    const int oz = (td - D) / 2, oy = (th - H) / 2, ox = (tw - W) / 2;
    Tensor<T> out(t.channels(), td, th, tw);
    for (int c = 0; c < t.channels(); ++c)
        for (int z = 0; z < td; ++z)
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x)
                    out.at(c, z, y, x) = t.at(c, detail::clamp_index(z - oz, D),
                                              detail::clamp_index(y - oy, H),
                                              detail::clamp_index(x - ox, W));
    return out;
}

/// Inverse of pad_replicate's placement: crop centered region of `dims`.
template <typename T>
Tensor<T> crop_center(const Tensor<T>& t, std::array<int, 3> dims) {
    const int D = dims[0], H = dims[1], W = dims[2];
    if (D > t.depth() || H > t.height() || W > t.width())
        throw ShapeError("crop_center: crop larger than input");
    const int oz = (t.depth() - D) / 2, oy = (t.height() - H) / 2, ox = (t.width() - W) / 2;
    Tensor<T> out(t.channels(), D, H, W);
    for (int c = 0; c < t.channels(); ++c)
        for (int z = 0; z < D; ++z)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    out.at(c, z, y, x) = t.at(c, z + oz, y + oy, x + ox);
    return out;
}

} // namespace cfreg
