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
#include <string>
#include <vector>

#include "cfreg/autodiff.hpp"
#include "cfreg/errors.hpp"
#include "cfreg/losses.hpp"
#include "cfreg/rng.hpp"
#include "cfreg/volume.hpp"

namespace cfreg {

/// Network and loss hyperparameters. The architecture is fixed at five
/// encoder and five decoder convolutions; L picks how many registration
/// steps (and loss levels) the single forward pass produces.
struct ModelConfig {
    int L = 3;
    std::array<int, 5> enc_channels{16, 32, 32, 64, 64};
    std::array<int, 5> dec_channels{64, 64, 64, 32, 16};
    double leaky_slope = 0.2;
    double head_init_scale = 1e-5;
    // Forwarded to the loss.
    int ncc_window = 9;
    double sigma = 1.0;
    double lambda = 0.0;

    void validate() const {
        if (L < 1 || L > 5) throw ConfigError("ModelConfig: L must be in [1,5]");
        for (int c : enc_channels)
            if (c < 1) throw ConfigError("ModelConfig: encoder channels must be >= 1");
        for (int c : dec_channels)
            if (c < 1) throw ConfigError("ModelConfig: decoder channels must be >= 1");
        if (leaky_slope <= 0 || leaky_slope >= 1)
            throw ConfigError("ModelConfig: leaky_slope must be in (0,1)");
        if (head_init_scale < 0)
            throw ConfigError("ModelConfig: head_init_scale must be >= 0");
        loss_weights().validate();
    }

    LossWeights loss_weights() const { return LossWeights{sigma, lambda, ncc_window}; }

    bool same_architecture(const ModelConfig& o) const {
        return L == o.L && enc_channels == o.enc_channels && dec_channels == o.dec_channels;
    }
};

/// Moving-path encoder levels consumed by the decoder: exactly {L..5}. Finer
/// moving features are dropped; warped moving images replace them once the
/// registration steps start firing.
inline std::vector<int> selected_moving_levels(int L) {
    std::vector<int> out;
    for (int lvl = L; lvl <= 5; ++lvl) out.push_back(lvl);
    return out;
}

namespace detail {

struct LayerSpec {
    std::string name;
    int cin = 0, cout = 0;
    int stride = 1;
    bool head = false;
};

/// Input channels of decoder convolution j (1-based): upsampled previous
/// features, fixed skip, selected moving skip, and — once a registration
/// step has fired — warped moving image plus upsampled field.
inline int decoder_in_channels(const ModelConfig& cfg, int j) {
    int in = j > 1 ? cfg.dec_channels[j - 2] : 0;
    in += cfg.enc_channels[5 - j];
    if (6 - j >= cfg.L) in += cfg.enc_channels[5 - j];
    if (j > 6 - cfg.L) in += 1 + 3;
    return in;
}

inline std::vector<LayerSpec> layer_specs(const ModelConfig& cfg) {
    std::vector<LayerSpec> specs;
    int cin = 1;
    for (int k = 1; k <= 5; ++k) {
        specs.push_back({"enc" + std::to_string(k), cin, cfg.enc_channels[k - 1],
                         k == 1 ? 1 : 2, false});
        cin = cfg.enc_channels[k - 1];
    }
    for (int j = 1; j <= 5; ++j)
        specs.push_back({"dec" + std::to_string(j), decoder_in_channels(cfg, j),
                         cfg.dec_channels[j - 1], 1, false});
    for (int s = 1; s <= cfg.L; ++s) {
        const int j = 5 - cfg.L + s; // decoder conv feeding this head
        specs.push_back({"head" + std::to_string(s), cfg.dec_channels[j - 1], 3, 1, true});
    }
    return specs;
}

} // namespace detail

/// Trainable parameter count; the encoder is counted once (it is shared by
/// both input paths).
inline int64_t param_count(const ModelConfig& cfg) {
    cfg.validate();
    int64_t n = 0;
    for (const auto& s : detail::layer_specs(cfg))
        n += int64_t(s.cout) * s.cin * 27 + s.cout;
    return n;
}

/// Structural instrumentation: how often each stage ran. A single
/// registration must increment encode/decode once and every decoder
/// convolution and active head exactly once.
struct PassCounters {
    int64_t encode_calls = 0;
    int64_t decode_calls = 0;
    std::array<int64_t, 5> decoder_conv_passes{};
    std::array<int64_t, 5> head_passes{};

    void reset() { *this = PassCounters{}; }
};

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> adam_m, adam_v; // optimizer moments, same shape as value
};

/// Graph node handles produced by one differentiable forward pass.
template <typename T>
struct ForwardNodes {
    std::vector<typename Graph<T>::NodeId> phi;     // L fields, coarse to fine
    std::vector<typename Graph<T>::NodeId> phi_hat; // L-1 upsampled fields
    std::vector<typename Graph<T>::NodeId> fixed_levels, moving_levels; // L pyramid leaves
    std::vector<typename Graph<T>::NodeId> param_ids; // aligned with params()
};

template <typename T>
struct RegistrationOutput {
    std::vector<DisplacementField<T>> phi;
    std::vector<DisplacementField<T>> phi_hat;

    const DisplacementField<T>& final_field() const { return phi.back(); }
};

/// Coarse-to-fine registration network: a weight-shared two-path encoder
/// (5 convolutions, stride 1 then 2x4, LeakyReLU) and a decoder that
/// accumulates features over 5 convolutions, firing a 3-channel field head
/// after each of the last L and refining additively between grids.
template <typename T>
class RegistrationModel {
public:
    explicit RegistrationModel(const ModelConfig& cfg, uint64_t seed = 0) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(hash_combine(seed, 0x6d6f64656cULL)); // "model"
        for (const auto& s : detail::layer_specs(cfg_)) {
            Param<T> w;
            w.name = s.name + ".weight";
            w.value = Tensor<T>(s.cout * s.cin, 3, 3, 3);
            if (s.head) {
                for (int64_t i = 0; i < w.value.size(); ++i)
                    w.value[i] = static_cast<T>(rng.normal() * cfg_.head_init_scale);
            } else {
                const double bound = std::sqrt(6.0 / (s.cin * 27.0));
                for (int64_t i = 0; i < w.value.size(); ++i)
                    w.value[i] = static_cast<T>(rng.uniform(-bound, bound));
            }
            w.adam_m = Tensor<T>(w.value.shape());
            w.adam_v = Tensor<T>(w.value.shape());
            params_.push_back(std::move(w));
            Param<T> b;
            b.name = s.name + ".bias";
            b.value = Tensor<T>(s.cout, 1, 1, 1);
            b.adam_m = Tensor<T>(b.value.shape());
            b.adam_v = Tensor<T>(b.value.shape());
            params_.push_back(std::move(b));
        }
    }

    const ModelConfig& config() const { return cfg_; }
    std::vector<Param<T>>& params() { return params_; }
    const std::vector<Param<T>>& params() const { return params_; }
    PassCounters& counters() const { return counters_; }

    int64_t param_count() const {
        int64_t n = 0;
        for (const auto& p : params_) n += p.value.size();
        return n;
    }

    /// Runs both encoder paths on a throwaway graph and returns the two
    /// 5-level feature pyramids (fixed path first).
    std::array<std::vector<Tensor<T>>, 2> encode(const Volume<T>& fixed,
                                                 const Volume<T>& moving) const {
        check_inputs(fixed, moving);
        Graph<T> g;
        const auto ids = leaf_params(g, false);
        std::array<std::vector<Tensor<T>>, 2> out;
        const auto ff = encode_path(g, g.leaf(fixed), ids);
        const auto fm = encode_path(g, g.leaf(moving), ids);
        counters_.encode_calls += 1;
        for (auto id : ff) out[0].push_back(g.value(id));
        for (auto id : fm) out[1].push_back(g.value(id));
        return out;
    }

    /// Differentiable forward pass: builds the whole network in `g` and
    /// returns handles to fields, pyramid leaves, and parameter leaves.
    ForwardNodes<T> forward(Graph<T>& g, const Volume<T>& fixed, const Volume<T>& moving,
                            bool needs_grad) const {
        check_inputs(fixed, moving);
        const int L = cfg_.L;
        ForwardNodes<T> out;
        out.param_ids = leaf_params(g, needs_grad);

        const auto fix_in = g.leaf(fixed);
        const auto mov_in = g.leaf(moving);

        // Loss pyramids as constant leaves; level L is the input itself.
        ImagePyramid<T> fixed_pyr = build_pyramid(fixed, L);
        ImagePyramid<T> moving_pyr = build_pyramid(moving, L);
        for (int i = 1; i < L; ++i) {
            out.fixed_levels.push_back(g.leaf(std::move(fixed_pyr.levels[i - 1])));
            out.moving_levels.push_back(g.leaf(std::move(moving_pyr.levels[i - 1])));
        }
        out.fixed_levels.push_back(fix_in);
        out.moving_levels.push_back(mov_in);

        const auto f_fix = encode_path(g, fix_in, out.param_ids);
        const auto f_mov = encode_path(g, mov_in, out.param_ids);
        counters_.encode_calls += 1;

        counters_.decode_calls += 1;
        typename Graph<T>::NodeId up_prev = -1;   // upsampled decoder features
        typename Graph<T>::NodeId phi_hat_prev = -1;
        for (int j = 1; j <= 5; ++j) {
            std::vector<typename Graph<T>::NodeId> inputs;
            if (j > 1) inputs.push_back(up_prev);
            inputs.push_back(f_fix[5 - j]);
            if (6 - j >= L) inputs.push_back(f_mov[5 - j]);
            if (j > 6 - L) {
                const int i = L + j - 5; // current pyramid level (1-based)
                const auto warped = g.warp(out.moving_levels[i - 1], phi_hat_prev);
                inputs.push_back(warped);
                inputs.push_back(phi_hat_prev);
            }
            const auto x = inputs.size() == 1 ? inputs[0] : g.concat(inputs);
            const auto d = g.leaky_relu(
                g.conv3d(x, out.param_ids[dec_w(j)], out.param_ids[dec_b(j)], 1),
                static_cast<T>(cfg_.leaky_slope));
            counters_.decoder_conv_passes[j - 1] += 1;
            if (j >= 6 - L) {
                const int s = j - (6 - L) + 1; // step index (1-based)
                const auto psi =
                    g.conv3d(d, out.param_ids[head_w(s)], out.param_ids[head_b(s)], 1);
                counters_.head_passes[s - 1] += 1;
                const auto phi_s = s == 1 ? psi : g.add(phi_hat_prev, psi);
                out.phi.push_back(phi_s);
                if (s < L) {
                    phi_hat_prev = g.scale(g.upsample2x(phi_s), T(2));
                    out.phi_hat.push_back(phi_hat_prev);
                }
            }
            if (j < 5) up_prev = g.upsample2x(d);
        }
        return out;
    }

    /// Inference: one forward pass, field values only.
    RegistrationOutput<T> register_pair(const Volume<T>& fixed,
                                        const Volume<T>& moving) const {
        Graph<T> g;
        const ForwardNodes<T> nodes = forward(g, fixed, moving, false);
        RegistrationOutput<T> out;
        for (auto id : nodes.phi) out.phi.push_back(g.value(id));
        for (auto id : nodes.phi_hat) out.phi_hat.push_back(g.value(id));
        return out;
    }

private:
    void check_inputs(const Volume<T>& fixed, const Volume<T>& moving) const {
        require_volume(fixed, "RegistrationModel");
        require_volume(moving, "RegistrationModel");
        if (!fixed.same_shape(moving))
            throw ShapeError("RegistrationModel: fixed " + fixed.shape_str() +
                             " vs moving " + moving.shape_str());
        for (int n : fixed.spatial_shape())
            if (n % 16 != 0 || n == 0)
                throw ShapeError("RegistrationModel: dims must be divisible by 16, got " +
                                 fixed.shape_str());
    }

    std::vector<typename Graph<T>::NodeId> leaf_params(Graph<T>& g, bool needs_grad) const {
        std::vector<typename Graph<T>::NodeId> ids;
        ids.reserve(params_.size());
        for (const auto& p : params_) ids.push_back(g.leaf(p.value, needs_grad));
        return ids;
    }

    /// Shared-weight encoder path: conv stride 1 then 2,2,2,2, LeakyReLU.
    std::array<typename Graph<T>::NodeId, 5>
    encode_path(Graph<T>& g, typename Graph<T>::NodeId x,
                const std::vector<typename Graph<T>::NodeId>& ids) const {
        std::array<typename Graph<T>::NodeId, 5> feats{};
        for (int k = 1; k <= 5; ++k) {
            x = g.leaky_relu(g.conv3d(x, ids[enc_w(k)], ids[enc_b(k)], k == 1 ? 1 : 2),
                             static_cast<T>(cfg_.leaky_slope));
            feats[k - 1] = x;
        }
        return feats;
    }

    // params_ layout: [enc1..enc5, dec1..dec5, head1..headL] x (weight, bias).
    static int enc_w(int k) { return 2 * (k - 1); }
    static int enc_b(int k) { return 2 * (k - 1) + 1; }
    static int dec_w(int j) { return 10 + 2 * (j - 1); }
    static int dec_b(int j) { return 10 + 2 * (j - 1) + 1; }
    int head_w(int s) const { return 20 + 2 * (s - 1); }
    int head_b(int s) const { return 20 + 2 * (s - 1) + 1; }

    ModelConfig cfg_;
    std::vector<Param<T>> params_;
    mutable PassCounters counters_;
};

} // namespace cfreg
