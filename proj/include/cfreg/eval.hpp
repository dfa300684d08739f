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

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "cfreg/errors.hpp"
#include "cfreg/field_ops.hpp"
#include "cfreg/losses.hpp"
#include "cfreg/model.hpp"
#include "cfreg/volume.hpp"

namespace cfreg {

/// Sorted nonzero labels present in a map.
inline std::vector<int16_t> labels_in(const LabelMap& m) {
    std::set<int16_t> s;
    for (int64_t i = 0; i < m.size(); ++i)
        if (m[i] != 0) s.insert(m[i]);
    return {s.begin(), s.end()};
}

struct DiceResult {
    std::vector<std::pair<int16_t, double>> per_label; // labels absent from both excluded
    double mean = 0;
};

/// Per-label Dice overlap 2|A∩B| / (|A|+|B|). Labels absent from both maps
/// are excluded from the mean; with `pooled` the counts are pooled across
/// labels instead of averaged.
inline DiceResult dsc(const LabelMap& a, const LabelMap& b,
                      const std::vector<int16_t>& labels, bool pooled = false) {
    if (!a.same_shape(b))
        throw ShapeError("dsc: shapes differ: " + a.shape_str() + " vs " + b.shape_str());
    if (labels.empty()) throw ConfigError("dsc: label set must be nonempty");
    for (int16_t l : labels)
        if (l == 0) throw ConfigError("dsc: background label 0 is not evaluable");
    std::map<int16_t, std::array<int64_t, 3>> counts; // |A|, |B|, |A∩B|
    for (int16_t l : labels) counts[l] = {0, 0, 0};
    for (int64_t i = 0; i < a.size(); ++i) {
        auto ia = counts.find(a[i]);
        if (ia != counts.end()) ++ia->second[0];
        auto ib = counts.find(b[i]);
        if (ib != counts.end()) ++ib->second[1];
        if (a[i] == b[i] && a[i] != 0) {
            auto ii = counts.find(a[i]);
            if (ii != counts.end()) ++ii->second[2];
        }
    }
    DiceResult r;
    double acc = 0;
    int64_t pooled_num = 0, pooled_den = 0;
    for (int16_t l : labels) {
        const auto& c = counts[l];
        if (c[0] + c[1] == 0) continue; // absent from both: excluded
        const double dice = 2.0 * c[2] / static_cast<double>(c[0] + c[1]);
        r.per_label.push_back({l, dice});
        acc += dice;
        pooled_num += 2 * c[2];
        pooled_den += c[0] + c[1];
    }
    if (r.per_label.empty())
        throw DataError("dsc: every requested label is absent from both maps");
    r.mean = pooled ? static_cast<double>(pooled_num) / pooled_den
                    : acc / static_cast<double>(r.per_label.size());
    return r;
}

/// One fixed/moving test or validation case.
template <typename T>
struct EvalPair {
    Volume<T> fixed, moving;
    LabelMap fixed_labels, moving_labels;
};

struct PairEval {
    double baseline_dsc = 0, final_dsc = 0;
    double baseline_ncc = 0, final_ncc = 0;
    double njd = 0;     // percent of non-positive Jacobian determinants
    double seconds = 0; // wall clock of the register call only
    std::vector<double> step_ncc; // per-step NCC at each field's native grid
};

struct EvalReport {
    std::vector<PairEval> pairs;
    double mean_baseline_dsc = 0, mean_dsc = 0, std_dsc = 0;
    double mean_baseline_ncc = 0, mean_ncc = 0, std_ncc = 0;
    double mean_njd = 0, std_njd = 0;
    double mean_seconds = 0, std_seconds = 0;
    std::vector<double> mean_step_ncc; // length L
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double m = 0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size());
    return {m, std::sqrt(v)};
}

} // namespace detail

/// Registers every pair and scores it: DSC of warped labels, NJD of the
/// final field, NCC before/after, per-step NCC at each intermediate grid,
/// and the wall clock of the register call. Read-only on the model.
/// With exclude_pyramid_seconds, a separately measured pyramid-construction
/// time for the pair is subtracted from each timing (an approximation; the
/// default reports the full register call).
template <typename T>
EvalReport evaluate(const RegistrationModel<T>& model, const std::vector<EvalPair<T>>& pairs,
                    bool pooled_dsc = false, bool exclude_pyramid_seconds = false) {
    if (pairs.empty()) throw DataError("evaluate: no pairs given");
    const int window = model.config().ncc_window;
    const int L = model.config().L;
    EvalReport rep;
    rep.mean_step_ncc.assign(L, 0.0);
    std::vector<double> dscs, nccs, njds, secs;
    for (const auto& pair : pairs) {
        PairEval pe;
        const auto labels = labels_in(pair.fixed_labels);
        pe.baseline_dsc = dsc(pair.fixed_labels, pair.moving_labels, labels, pooled_dsc).mean;
        pe.baseline_ncc = static_cast<double>(local_ncc(pair.moving, pair.fixed, window));

        double pyramid_seconds = 0;
        if (exclude_pyramid_seconds) {
            const auto p0 = std::chrono::steady_clock::now();
            build_pyramid(pair.fixed, L);
            build_pyramid(pair.moving, L);
            const auto p1 = std::chrono::steady_clock::now();
            pyramid_seconds = std::chrono::duration<double>(p1 - p0).count();
        }
        const auto t0 = std::chrono::steady_clock::now();
        const RegistrationOutput<T> out = model.register_pair(pair.fixed, pair.moving);
        const auto t1 = std::chrono::steady_clock::now();
        pe.seconds =
            std::max(0.0, std::chrono::duration<double>(t1 - t0).count() - pyramid_seconds);

        const DisplacementField<T>& phi_final = out.final_field();
        const LabelMap warped_labels = warp_nearest(pair.moving_labels, phi_final);
        pe.final_dsc = dsc(pair.fixed_labels, warped_labels, labels, pooled_dsc).mean;
        pe.final_ncc = static_cast<double>(
            local_ncc(warp_trilinear(pair.moving, phi_final), pair.fixed, window));
        pe.njd = njd_percent(phi_final);

        const ImagePyramid<T> fix_pyr = build_pyramid(pair.fixed, L);
        const ImagePyramid<T> mov_pyr = build_pyramid(pair.moving, L);
        for (int i = 1; i <= L; ++i) {
            const auto& phi = out.phi[i - 1];
            const double v = static_cast<double>(
                local_ncc(warp_trilinear(mov_pyr.level(i), phi), fix_pyr.level(i), window));
            pe.step_ncc.push_back(v);
            rep.mean_step_ncc[i - 1] += v;
        }
        dscs.push_back(pe.final_dsc);
        nccs.push_back(pe.final_ncc);
        njds.push_back(pe.njd);
        secs.push_back(pe.seconds);
        rep.mean_baseline_dsc += pe.baseline_dsc;
        rep.mean_baseline_ncc += pe.baseline_ncc;
        rep.pairs.push_back(std::move(pe));
    }
    const double n = static_cast<double>(rep.pairs.size());
    rep.mean_baseline_dsc /= n;
    rep.mean_baseline_ncc /= n;
    for (double& v : rep.mean_step_ncc) v /= n;
    std::tie(rep.mean_dsc, rep.std_dsc) = detail::mean_std(dscs);
    std::tie(rep.mean_ncc, rep.std_ncc) = detail::mean_std(nccs);
    std::tie(rep.mean_njd, rep.std_njd) = detail::mean_std(njds);
    std::tie(rep.mean_seconds, rep.std_seconds) = detail::mean_std(secs);
    return rep;
}

/// Step-wise refinement data for one pair: each intermediate field applied
/// to the matching moving-pyramid level (the last one at full resolution).
template <typename T>
struct StepwiseReport {
    std::vector<Volume<T>> warped;          // L volumes, coarse to fine
    std::vector<double> ncc;                // NCC against the fixed level
    std::vector<std::array<int, 3>> grids;  // measurement grid of each step
};

template <typename T>
StepwiseReport<T> stepwise_report(const RegistrationModel<T>& model, const Volume<T>& fixed,
                                  const Volume<T>& moving) {
    const int L = model.config().L;
    const int window = model.config().ncc_window;
    const RegistrationOutput<T> out = model.register_pair(fixed, moving);
    const ImagePyramid<T> fix_pyr = build_pyramid(fixed, L);
    const ImagePyramid<T> mov_pyr = build_pyramid(moving, L);
    StepwiseReport<T> rep;
    for (int i = 1; i <= L; ++i) {
        Volume<T> warped = warp_trilinear(mov_pyr.level(i), out.phi[i - 1]);
        rep.ncc.push_back(static_cast<double>(local_ncc(warped, fix_pyr.level(i), window)));
        rep.grids.push_back(warped.spatial_shape());
        rep.warped.push_back(std::move(warped));
    }
    return rep;
}

} // namespace cfreg
