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

#include "cfreg/errors.hpp"
#include "cfreg/model.hpp"

namespace cfreg {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One ADAM update over all parameters; `t` is the 1-based step count used
/// for bias correction. Moments live inside each Param.
template <typename T>
void adam_step(std::vector<Param<T>>& params, const std::vector<const Tensor<T>*>& grads,
               const AdamConfig& cfg, int64_t t) {
    if (grads.size() != params.size())
        throw ShapeError("adam_step: gradient list size mismatch");
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
    const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
    const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
    for (size_t p = 0; p < params.size(); ++p) {
        Param<T>& pr = params[p];
        const Tensor<T>& g = *grads[p];
        if (!g.same_shape(pr.value)) throw ShapeError("adam_step: gradient shape mismatch");
        for (int64_t i = 0; i < g.size(); ++i) {
            pr.adam_m[i] = b1 * pr.adam_m[i] + (T(1) - b1) * g[i];
            pr.adam_v[i] = b2 * pr.adam_v[i] + (T(1) - b2) * g[i] * g[i];
            const T mhat = pr.adam_m[i] / bc1;
            const T vhat = pr.adam_v[i] / bc2;
            pr.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

} // namespace cfreg
