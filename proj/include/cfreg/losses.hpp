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
#include <vector>

#include "cfreg/autodiff.hpp"
#include "cfreg/errors.hpp"
#include "cfreg/field_ops.hpp"
#include "cfreg/volume.hpp"

namespace cfreg {

/// Denominator stabilizer for degenerate (near-constant) NCC windows.
inline constexpr double kNccEpsilon = 1e-5;

struct LossWeights {
    double sigma = 1.0;  ///< weight of the regularization term
    double lambda = 0.0; ///< weight of the invertibility (folding) penalty
    int ncc_window = 9;  ///< side length of the local NCC window

    void validate() const {
        if (sigma < 0) throw ConfigError("LossWeights: sigma must be >= 0");
        if (lambda < 0) throw ConfigError("LossWeights: lambda must be >= 0");
        if (ncc_window < 3 || ncc_window % 2 == 0)
            throw ConfigError("LossWeights: ncc_window must be odd and >= 3");
    }
};

/// Per-level loss terms plus the weighted total,
/// total = sum_i 2^-(L-i) * (sim_i + sigma*(smooth_i + lambda*inv_i)).
struct LossReport {
    struct Level {
        double sim = 0;    ///< -local_ncc of (warped moving, fixed)
        double smooth = 0; ///< mean squared forward-difference field gradient
        double inv = 0;    ///< mean hinge on negative Jacobian determinants
        double weight = 0; ///< 2^-(L-i)
    };
    std::vector<Level> levels;
    double total = 0;

    int num_levels() const { return static_cast<int>(levels.size()); }
};

/// 1-based level weight 2^-(L-i).
inline double level_weight(int i, int L) { return std::ldexp(1.0, -(L - i)); }

// ---------------------------------------------------------------------------
// Differentiable graph builders. The plain evaluation wrappers below run the
// same builders on a throwaway graph, so both paths compute identical values.
// ---------------------------------------------------------------------------

/// Mean squared local correlation coefficient CC^2 over zero-padded windows,
/// in [0,1]. Windows use the constant count N = window^3 regardless of
/// boundary truncation; variances are clamped at zero before the stabilized
/// division.
template <typename T>
typename Graph<T>::NodeId local_ncc_node(Graph<T>& g, typename Graph<T>::NodeId a,
                                         typename Graph<T>::NodeId b, int window) {
    require_volume(g.value(a), "local_ncc");
    require_volume(g.value(b), "local_ncc");
    if (!g.value(a).same_shape(g.value(b)))
        throw ShapeError("local_ncc: shapes differ: " + g.value(a).shape_str() + " vs " +
                         g.value(b).shape_str());
    if (window < 1 || window % 2 == 0)
        throw ConfigError("local_ncc: window must be odd and positive");
    const T inv_n = T(1) / static_cast<T>(int64_t(window) * window * window);
    const auto sa = g.box_sum(a, window);
    const auto sb = g.box_sum(b, window);
    const auto sab = g.box_sum(g.mul(a, b), window);
    const auto saa = g.box_sum(g.mul(a, a), window);
    const auto sbb = g.box_sum(g.mul(b, b), window);
    const auto cross = g.sub(sab, g.scale(g.mul(sa, sb), inv_n));
    const auto var_a = g.relu(g.sub(saa, g.scale(g.mul(sa, sa), inv_n)));
    const auto var_b = g.relu(g.sub(sbb, g.scale(g.mul(sb, sb), inv_n)));
    const auto denom = g.add_scalar(g.mul(var_a, var_b), static_cast<T>(kNccEpsilon));
    return g.reduce_mean(g.div(g.mul(cross, cross), denom));
}

/// Mean over voxels of the sum of the 9 squared forward-difference partials.
template <typename T>
typename Graph<T>::NodeId grad_l2_node(Graph<T>& g, typename Graph<T>::NodeId field) {
    require_field(g.value(field), "grad_l2");
    for (int n : g.value(field).spatial_shape())
        if (n < 2) throw ShapeError("grad_l2: every axis must be >= 2");
    typename Graph<T>::NodeId acc = -1;
    for (int axis = 0; axis < 3; ++axis) {
        const auto d = g.axis_diff(field, axis);
        const auto m = g.reduce_mean(g.mul(d, d));
        acc = axis == 0 ? m : g.add(acc, m);
    }
    // reduce_mean averaged over 3 channels as well; rescale to a per-voxel sum.
    return g.scale(acc, T(3));
}

/// Mean over voxels of max(0, -det J); same difference stencil as
/// jacobian_determinants.
template <typename T>
typename Graph<T>::NodeId neg_jac_penalty_node(Graph<T>& g,
                                               typename Graph<T>::NodeId field) {
    require_field(g.value(field), "neg_jac_penalty");
    for (int n : g.value(field).spatial_shape())
        if (n < 2) throw ShapeError("neg_jac_penalty: every axis must be >= 2");
    // e[r][c] = d u_r / d p_c, diagonal shifted by 1 to form J = I + du/dp.
    typename Graph<T>::NodeId e[3][3];
    for (int c = 0; c < 3; ++c) {
        const auto d = g.axis_diff(field, c);
        for (int r = 0; r < 3; ++r) {
            e[r][c] = g.channel(d, r);
            if (r == c) e[r][c] = g.add_scalar(e[r][c], T(1));
        }
    }
    const auto m00 = g.sub(g.mul(e[1][1], e[2][2]), g.mul(e[1][2], e[2][1]));
    const auto m01 = g.sub(g.mul(e[1][0], e[2][2]), g.mul(e[1][2], e[2][0]));
    const auto m02 = g.sub(g.mul(e[1][0], e[2][1]), g.mul(e[1][1], e[2][0]));
    const auto det = g.add(g.sub(g.mul(e[0][0], m00), g.mul(e[0][1], m01)),
                           g.mul(e[0][2], m02));
    return g.reduce_mean(g.relu(g.scale(det, T(-1))));
}

/// Node ids of every term of the multi-level loss; `inv` stays empty when
/// lambda == 0 so the penalty never enters the graph.
template <typename T>
struct TotalLossNodes {
    std::vector<typename Graph<T>::NodeId> sim, smooth, inv;
    typename Graph<T>::NodeId total = -1;
};

/// Builds the weighted multi-level loss over L (fixed, moving, field) level
/// triples ordered coarse to fine.
template <typename T>
TotalLossNodes<T> total_loss_node(Graph<T>& g,
                                  const std::vector<typename Graph<T>::NodeId>& fixed_levels,
                                  const std::vector<typename Graph<T>::NodeId>& moving_levels,
                                  const std::vector<typename Graph<T>::NodeId>& fields,
                                  const LossWeights& w) {
    w.validate();
    const int L = static_cast<int>(fields.size());
    if (L < 1 || fixed_levels.size() != fields.size() ||
        moving_levels.size() != fields.size())
        throw ShapeError("total_loss: level lists must have equal nonzero length");
    TotalLossNodes<T> out;
    typename Graph<T>::NodeId acc = -1;
    for (int i = 1; i <= L; ++i) {
        const auto fix = fixed_levels[i - 1];
        const auto mov = moving_levels[i - 1];
        const auto phi = fields[i - 1];
        if (!g.value(phi).same_spatial_shape(g.value(fix)) ||
            !g.value(phi).same_spatial_shape(g.value(mov)))
            throw ShapeError("total_loss: field/pyramid shape mismatch at level " +
                             std::to_string(i));
        const auto warped = g.warp(mov, phi);
        const auto sim = g.scale(local_ncc_node(g, warped, fix, w.ncc_window), T(-1));
        const auto smooth = grad_l2_node(g, phi);
        out.sim.push_back(sim);
        out.smooth.push_back(smooth);
        auto reg = smooth;
        if (w.lambda > 0) {
            const auto inv = neg_jac_penalty_node(g, phi);
            out.inv.push_back(inv);
            reg = g.add(reg, g.scale(inv, static_cast<T>(w.lambda)));
        }
        const auto level = g.add(sim, g.scale(reg, static_cast<T>(w.sigma)));
        const auto weighted = g.scale(level, static_cast<T>(level_weight(i, L)));
        acc = i == 1 ? weighted : g.add(acc, weighted);
    }
    out.total = acc;
    return out;
}

/// Reads the term scalars out of a built loss graph. `inv` is filled from the
/// graph when present, otherwise recomputed outside it (so a lambda=0 total
/// stays bit-independent of the penalty while reports remain complete).
template <typename T>
LossReport make_loss_report(Graph<T>& g, const TotalLossNodes<T>& nodes,
                            const std::vector<typename Graph<T>::NodeId>& fields) {
    LossReport r;
    const int L = static_cast<int>(nodes.sim.size());
    for (int i = 1; i <= L; ++i) {
        typename LossReport::Level lv;
        lv.sim = static_cast<double>(g.scalar(nodes.sim[i - 1]));
        lv.smooth = static_cast<double>(g.scalar(nodes.smooth[i - 1]));
        lv.inv = nodes.inv.empty()
                     ? static_cast<double>(neg_jac_penalty(g.value(fields[i - 1])))
                     : static_cast<double>(g.scalar(nodes.inv[i - 1]));
        lv.weight = level_weight(i, L);
        r.levels.push_back(lv);
    }
    r.total = static_cast<double>(g.scalar(nodes.total));
    return r;
}

// ---------------------------------------------------------------------------
// Plain (non-differentiable) evaluation wrappers.
// ---------------------------------------------------------------------------

template <typename T>
T local_ncc(const Volume<T>& a, const Volume<T>& b, int window) {
    Graph<T> g;
    return g.scalar(local_ncc_node(g, g.leaf(a), g.leaf(b), window));
}

template <typename T>
T grad_l2(const DisplacementField<T>& field) {
    Graph<T> g;
    return g.scalar(grad_l2_node(g, g.leaf(field)));
}

template <typename T>
T neg_jac_penalty(const DisplacementField<T>& field) {
    const Tensor<T> det = jacobian_determinants(field);
    T acc = 0;
    for (int64_t i = 0; i < det.size(); ++i)
        if (det[i] < T(0)) acc -= det[i];
    return acc / static_cast<T>(det.size());
}

template <typename T>
LossReport total_loss(const ImagePyramid<T>& fixed_pyr, const ImagePyramid<T>& moving_pyr,
                      const std::vector<DisplacementField<T>>& fields,
                      const LossWeights& w) {
    if (fixed_pyr.num_levels() != static_cast<int>(fields.size()) ||
        moving_pyr.num_levels() != static_cast<int>(fields.size()))
        throw ShapeError("total_loss: pyramid depth vs field count mismatch");
    Graph<T> g;
    std::vector<typename Graph<T>::NodeId> fix, mov, phi;
    for (size_t i = 0; i < fields.size(); ++i) {
        fix.push_back(g.leaf(fixed_pyr.levels[i]));
        mov.push_back(g.leaf(moving_pyr.levels[i]));
        phi.push_back(g.leaf(fields[i]));
    }
    const TotalLossNodes<T> nodes = total_loss_node(g, fix, mov, phi, w);
    return make_loss_report(g, nodes, phi);
}

} // namespace cfreg
