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
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cfreg/adam.hpp"
#include "cfreg/checkpoint.hpp"
#include "cfreg/errors.hpp"
#include "cfreg/eval.hpp"
#include "cfreg/model.hpp"
#include "cfreg/rng.hpp"

namespace cfreg {

struct TrainConfig {
    double lr = 1e-4;
    int batch_size = 1; // the pipeline is single-pair; kept explicit and validated
    int64_t iterations = 1;
    uint64_t seed = 0;
    int64_t val_interval = 100;
    int64_t val_pairs = 10;
    int64_t checkpoint_interval = 500;

    void validate() const {
        if (lr <= 0) throw ConfigError("TrainConfig: lr must be > 0");
        if (batch_size != 1) throw ConfigError("TrainConfig: only batch_size 1 is supported");
        if (iterations < 1) throw ConfigError("TrainConfig: iterations must be >= 1");
        if (val_interval < 1) throw ConfigError("TrainConfig: val_interval must be >= 1");
        if (val_pairs < 1) throw ConfigError("TrainConfig: val_pairs must be >= 1");
        if (checkpoint_interval < 1)
            throw ConfigError("TrainConfig: checkpoint_interval must be >= 1");
    }
};

/// Two distinct indices drawn uniformly, order significant (first is fixed).
inline std::pair<int, int> sample_pair_indices(int n, Rng& rng) {
    if (n < 2) throw ConfigError("sample_pair: dataset must hold at least 2 volumes");
    const int i = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n)));
    int j = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(n - 1)));
    if (j >= i) ++j;
    return {i, j};
}

template <typename T>
std::pair<const Volume<T>*, const Volume<T>*>
sample_pair(const std::vector<Volume<T>>& dataset, Rng& rng) {
    const auto [i, j] = sample_pair_indices(static_cast<int>(dataset.size()), rng);
    return {&dataset[i], &dataset[j]};
}

/// One optimization step: forward, multi-level loss, backward, ADAM update.
/// A non-finite total aborts with a per-level diagnostic dump.
template <typename T>
LossReport train_step(RegistrationModel<T>& model, const Volume<T>& fixed,
                      const Volume<T>& moving, const AdamConfig& adam, int64_t t) {
    Graph<T> g;
    const ForwardNodes<T> nodes = model.forward(g, fixed, moving, true);
    const TotalLossNodes<T> loss =
        total_loss_node(g, nodes.fixed_levels, nodes.moving_levels, nodes.phi,
                        model.config().loss_weights());
    LossReport report = make_loss_report(g, loss, nodes.phi);
    if (!std::isfinite(report.total)) {
        std::string dump = "train_step: non-finite loss at iteration " + std::to_string(t);
        for (size_t i = 0; i < report.levels.size(); ++i) {
            const auto& lv = report.levels[i];
            dump += "; level " + std::to_string(i + 1) + ": sim=" + std::to_string(lv.sim) +
                    " smooth=" + std::to_string(lv.smooth) + " inv=" + std::to_string(lv.inv);
        }
        throw NumericalError(dump);
    }
    g.backward(loss.total);
    std::vector<const Tensor<T>*> grads;
    grads.reserve(nodes.param_ids.size());
    for (auto id : nodes.param_ids) grads.push_back(&g.grad(id));
    adam_step(model.params(), grads, adam, t);
    return report;
}

struct ValMetrics {
    double mean_ncc = 0, mean_dsc = 0, mean_njd = 0;
};

/// Scores fixed validation pairs with the current parameters; never mutates
/// the model (enforced by constness).
template <typename T>
ValMetrics validate(const RegistrationModel<T>& model, const std::vector<EvalPair<T>>& pairs) {
    if (pairs.empty()) throw DataError("validate: needs at least one pair");
    const int window = model.config().ncc_window;
    ValMetrics m;
    for (const auto& pair : pairs) {
        const RegistrationOutput<T> out = model.register_pair(pair.fixed, pair.moving);
        const DisplacementField<T>& phi = out.final_field();
        m.mean_ncc += static_cast<double>(
            local_ncc(warp_trilinear(pair.moving, phi), pair.fixed, window));
        const auto labels = labels_in(pair.fixed_labels);
        m.mean_dsc += dsc(pair.fixed_labels, warp_nearest(pair.moving_labels, phi), labels).mean;
        m.mean_njd += njd_percent(phi);
    }
    const double n = static_cast<double>(pairs.size());
    m.mean_ncc /= n;
    m.mean_dsc /= n;
    m.mean_njd /= n;
    return m;
}

namespace detail {

inline std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

/// Keeps only the header and rows with iteration <= it0 (used when resuming
/// so reruns of later iterations replace, not duplicate, their rows).
inline void truncate_csv_after(const std::string& path, int64_t it0) {
    std::ifstream in(path);
    if (!in) return;
    std::vector<std::string> keep;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            keep.push_back(line);
            first = false;
            continue;
        }
        const int64_t it = std::strtoll(line.c_str(), nullptr, 10);
        if (it <= it0) keep.push_back(line);
    }
    in.close();
    std::string joined;
    for (const auto& l : keep) joined += l + "\n";
    atomic_write_text(path, joined);
}

} // namespace detail

struct TrainResult {
    int64_t iterations_run = 0;
    std::string final_checkpoint;
    double best_val_dsc = -1.0;
    int64_t best_val_iteration = -1;
};

/// Full training loop. Emits `metrics.csv` (one row per iteration),
/// `validation.csv` (every val_interval), and checkpoints under
/// `<out_dir>/checkpoints/`. With `resume`, picks up from the latest
/// checkpoint and reproduces the loss sequence an uninterrupted run of the
/// same seed would have produced.
template <typename T>
TrainResult train_loop(RegistrationModel<T>& model, const TrainConfig& cfg,
                       const std::vector<Volume<T>>& train_set,
                       const std::vector<EvalPair<T>>& val_pairs,
                       const std::string& out_dir, bool resume = false,
                       std::ostream* log = nullptr) {
    cfg.validate();
    if (train_set.size() < 2)
        throw ConfigError("train_loop: training set must hold at least 2 volumes");
    namespace fs = std::filesystem;
    const fs::path root(out_dir);
    const fs::path ckpt_dir = root / "checkpoints";
    fs::create_directories(ckpt_dir);
    const std::string metrics_path = (root / "metrics.csv").string();
    const std::string val_path = (root / "validation.csv").string();

    CheckpointMeta meta;
    meta.seed = cfg.seed;
    int64_t it0 = 0;
    if (resume) {
        meta = load_checkpoint(resolve_latest(ckpt_dir.string()), model);
        if (meta.seed != cfg.seed)
            throw ConfigError("train_loop: resume seed " + std::to_string(cfg.seed) +
                              " differs from checkpoint seed " + std::to_string(meta.seed));
        it0 = meta.iteration;
        detail::truncate_csv_after(metrics_path, it0);
        detail::truncate_csv_after(val_path, it0);
    }

    const int L = model.config().L;
    if (!fs::exists(metrics_path)) {
        std::string hdr = "iteration";
        for (const char* term : {"sim", "smooth", "inv"})
            for (int i = 1; i <= L; ++i)
                hdr += "," + std::string(term) + "_" + std::to_string(i);
        hdr += ",total,seconds\n";
        detail::atomic_write_text(metrics_path, hdr);
    }
    if (!fs::exists(val_path))
        detail::atomic_write_text(val_path, "iteration,mean_ncc,mean_dsc,mean_njd\n");

    AdamConfig adam;
    adam.lr = cfg.lr;
    std::ofstream metrics(metrics_path, std::ios::app);
    std::ofstream val_csv(val_path, std::ios::app);
    if (!metrics || !val_csv) throw IoError("train_loop: cannot open CSV outputs in " + out_dir);

    TrainResult result;
    result.best_val_dsc = meta.best_val_dsc;
    result.best_val_iteration = meta.best_val_iteration;
    for (int64_t it = it0 + 1; it <= cfg.iterations; ++it) {
        Rng rng(hash_combine(hash_combine(cfg.seed, 0x747261696eULL), // "train"
                             static_cast<uint64_t>(it)));
        const auto [fi, mi] = sample_pair_indices(static_cast<int>(train_set.size()), rng);
        const auto t0 = std::chrono::steady_clock::now();
        const LossReport rep = train_step(model, train_set[fi], train_set[mi], adam, it);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::string row = std::to_string(it);
        for (const auto& lv : rep.levels) row += "," + detail::fmt_g(lv.sim);
        for (const auto& lv : rep.levels) row += "," + detail::fmt_g(lv.smooth);
        for (const auto& lv : rep.levels) row += "," + detail::fmt_g(lv.inv);
        row += "," + detail::fmt_g(rep.total) + "," + detail::fmt_g(secs);
        metrics << row << "\n";
        metrics.flush();

        if (!val_pairs.empty() && it % cfg.val_interval == 0) {
            const ValMetrics vm = validate(model, val_pairs);
            val_csv << it << "," << detail::fmt_g(vm.mean_ncc) << ","
                    << detail::fmt_g(vm.mean_dsc) << "," << detail::fmt_g(vm.mean_njd) << "\n";
            val_csv.flush();
            if (vm.mean_dsc > result.best_val_dsc) {
                result.best_val_dsc = vm.mean_dsc;
                result.best_val_iteration = it;
            }
            if (log)
                (*log) << "iter " << it << " loss " << detail::fmt_g(rep.total) << " val_ncc "
                       << detail::fmt_g(vm.mean_ncc) << " val_dsc " << detail::fmt_g(vm.mean_dsc)
                       << " val_njd " << detail::fmt_g(vm.mean_njd) << std::endl;
        }
        if (it % cfg.checkpoint_interval == 0 || it == cfg.iterations) {
            meta.iteration = it;
            meta.best_val_dsc = result.best_val_dsc;
            meta.best_val_iteration = result.best_val_iteration;
            const std::string name = checkpoint_name(it);
            save_checkpoint((ckpt_dir / name).string(), model, meta);
            write_latest_marker(ckpt_dir.string(), it);
            result.final_checkpoint = (ckpt_dir / name).string();
        }
        result.iterations_run = it - it0;
    }
    return result;
}

struct AblateRow {
    int L = 0;
    double lambda = 0;
    double dsc = 0, njd = 0, seconds = 0;
    std::string error; // empty on success; failures keep the run going
};

/// Trains one model per (L, lambda) grid cell under an identical budget and
/// seed, then evaluates each on the same test pairs.
template <typename T>
std::vector<AblateRow> ablate(const ModelConfig& base_model, const TrainConfig& base_train,
                              const std::vector<int>& l_values,
                              const std::vector<double>& lambda_values,
                              const std::vector<Volume<T>>& train_set,
                              const std::vector<EvalPair<T>>& val_pairs,
                              const std::vector<EvalPair<T>>& test_pairs,
                              const std::string& out_dir, std::ostream* log = nullptr) {
    if (l_values.empty() || lambda_values.empty())
        throw ConfigError("ablate: empty grid");
    std::vector<AblateRow> rows;
    for (int L : l_values)
        for (double lambda : lambda_values) {
            AblateRow row;
            row.L = L;
            row.lambda = lambda;
            try {
                ModelConfig mc = base_model;
                mc.L = L;
                mc.lambda = lambda;
                RegistrationModel<T> model(mc, base_train.seed);
                char cell[64];
                std::snprintf(cell, sizeof(cell), "L%d_lambda%g", L, lambda);
                const std::string cell_dir =
                    (std::filesystem::path(out_dir) / cell).string();
                if (log) (*log) << "ablate: training " << cell << std::endl;
                train_loop(model, base_train, train_set, val_pairs, cell_dir, false, log);
                const EvalReport rep = evaluate(model, test_pairs);
                row.dsc = rep.mean_dsc;
                row.njd = rep.mean_njd;
                row.seconds = rep.mean_seconds;
            } catch (const std::exception& e) {
                row.error = e.what();
            }
            rows.push_back(std::move(row));
        }
    return rows;
}

/// Serializes ablation rows in the fixed column order.
inline std::string ablate_csv(const std::vector<AblateRow>& rows) {
    std::string out = "L,lambda,dsc,njd,seconds,error\n";
    for (const auto& r : rows) {
        std::string err = r.error; // keep one cell per column
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        out += std::to_string(r.L) + "," + detail::fmt_g(r.lambda) + "," +
               detail::fmt_g(r.dsc) + "," + detail::fmt_g(r.njd) + "," +
               detail::fmt_g(r.seconds) + "," + err + "\n";
    }
    return out;
}

} // namespace cfreg
