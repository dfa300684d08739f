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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfreg/errors.hpp"
#include "cfreg/eval.hpp"
#include "cfreg/field_ops.hpp"
#include "cfreg/nifti_io.hpp"
#include "cfreg/phantom.hpp"
#include "cfreg/raw_io.hpp"
#include "cfreg/rng.hpp"

namespace cfreg {

struct SynthConfig {
    std::array<int, 3> shape{48, 48, 48}; // (D, H, W)
    int n_blobs = 6;
    int n_train = 30;
    int n_val = 4;
    int n_test = 5;
    double max_disp = 2.0;
    uint64_t seed = 0;
    std::string format = "nifti"; // or "raw"

    void validate() const {
        for (int n : shape)
            if (n % 16 != 0 || n <= 0)
                throw ConfigError("synth: shape dims must be positive multiples of 16");
        if (n_blobs < 1) throw ConfigError("synth: n_blobs must be >= 1");
        if (n_train < 2) throw ConfigError("synth: n_train must be >= 2");
        if (n_val < 0 || n_test < 0)
            throw ConfigError("synth: split sizes must be >= 0");
        if (max_disp <= 0) throw ConfigError("synth: max_disp must be > 0");
        if (format != "nifti" && format != "raw")
            throw ConfigError("synth: format must be nifti or raw");
    }
};

/// Index of a generated dataset: one template phantom and N warped subjects,
/// split into train/val/test. Stored as manifest.json next to the files.
struct DatasetManifest {
    std::array<int, 3> shape{0, 0, 0};
    uint64_t seed = 0;
    double max_disp = 0;
    std::string format = "nifti";
    std::vector<std::string> train, val, test; // subject ids

    std::string ext() const { return format == "raw" ? ".raw" : ".nii"; }
    std::string volume_path(const std::string& dir, const std::string& id) const {
        return (std::filesystem::path(dir) / (id + ext())).string();
    }
    std::string labels_path(const std::string& dir, const std::string& id) const {
        return (std::filesystem::path(dir) / (id + "_labels" + ext())).string();
    }
    std::string field_path(const std::string& dir, const std::string& id) const {
        return (std::filesystem::path(dir) / (id + "_field" + ext())).string();
    }

    void save(const std::string& dir) const {
        nlohmann::json j;
        j["format"] = format;
        j["shape"] = shape;
        j["seed"] = seed;
        j["max_disp"] = max_disp;
        j["splits"] = {{"train", train}, {"val", val}, {"test", test}};
        detail::atomic_write_text(
            (std::filesystem::path(dir) / "manifest.json").string(), j.dump(2) + "\n");
    }

    static DatasetManifest load(const std::string& dir) {
        const auto path = std::filesystem::path(dir) / "manifest.json";
        std::ifstream in(path);
        if (!in) throw DataError("dataset: missing manifest " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("dataset: bad manifest JSON: " + std::string(e.what()));
        }
        DatasetManifest m;
        try {
            m.format = j.at("format").get<std::string>();
            m.shape = j.at("shape").get<std::array<int, 3>>();
            m.seed = j.at("seed").get<uint64_t>();
            m.max_disp = j.at("max_disp").get<double>();
            m.train = j.at("splits").at("train").get<std::vector<std::string>>();
            m.val = j.at("splits").at("val").get<std::vector<std::string>>();
            m.test = j.at("splits").at("test").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("dataset: manifest missing fields: " + std::string(e.what()));
        }
        return m;
    }
};

namespace detail {

template <typename T>
void save_any(const Tensor<T>& t, const std::string& path, const std::string& format) {
    if (format == "raw")
        save_raw(t, path);
    else
        save_nifti(t, path);
}

template <typename T>
Tensor<T> load_any(const std::string& path, const std::string& format) {
    return format == "raw" ? load_raw<T>(path) : load_nifti<T>(path);
}

} // namespace detail

/// Generates the synthetic dataset: one labeled template phantom plus
/// n_train+n_val+n_test subjects, each the template warped by its own
/// fold-free smooth field (also saved, as ground truth).
template <typename T>
DatasetManifest synth_dataset(const SynthConfig& cfg, const std::string& out_dir,
                              std::ostream* log = nullptr) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    DatasetManifest m;
    m.shape = cfg.shape;
    m.seed = cfg.seed;
    m.max_disp = cfg.max_disp;
    m.format = cfg.format;

    auto [tmpl, tmpl_labels] = make_phantom<T>(cfg.seed, cfg.shape, cfg.n_blobs);
    detail::save_any(tmpl, m.volume_path(out_dir, "template"), cfg.format);
    detail::save_any(tmpl_labels, m.labels_path(out_dir, "template"), cfg.format);

    const int total = cfg.n_train + cfg.n_val + cfg.n_test;
    for (int s = 0; s < total; ++s) {
        char id[32];
        std::snprintf(id, sizeof(id), "subj_%03d", s);
        const DisplacementField<T> field =
            make_smooth_field<T>(hash_combine(cfg.seed, static_cast<uint64_t>(s) + 1),
                                 cfg.shape, cfg.max_disp);
        const Volume<T> vol = warp_trilinear(tmpl, field);
        const LabelMap labels = warp_nearest(tmpl_labels, field);
        detail::save_any(vol, m.volume_path(out_dir, id), cfg.format);
        detail::save_any(labels, m.labels_path(out_dir, id), cfg.format);
        detail::save_any(field, m.field_path(out_dir, id), cfg.format);
        auto& split = s < cfg.n_train            ? m.train
                      : s < cfg.n_train + cfg.n_val ? m.val
                                                    : m.test;
        split.push_back(id);
        if (log && (s + 1) % 10 == 0)
            (*log) << "synth: " << (s + 1) << "/" << total << " subjects" << std::endl;
    }
    m.save(out_dir);
    return m;
}

/// Loads the volumes of one split, in manifest order.
template <typename T>
std::vector<Volume<T>> load_split_volumes(const DatasetManifest& m, const std::string& dir,
                                          const std::vector<std::string>& ids) {
    std::vector<Volume<T>> out;
    out.reserve(ids.size());
    for (const auto& id : ids)
        out.push_back(detail::load_any<T>(m.volume_path(dir, id), m.format));
    return out;
}

/// Builds ordered fixed/moving pairs (all i != j combinations of the split).
/// When that exceeds max_pairs, a seed-shuffled subset is taken, so the
/// same manifest and cap always produce the same pairs.
template <typename T>
std::vector<EvalPair<T>> load_pairs(const DatasetManifest& m, const std::string& dir,
                                    const std::vector<std::string>& ids, int64_t max_pairs,
                                    uint64_t seed) {
    if (ids.size() < 2) throw DataError("load_pairs: split needs at least 2 subjects");
    std::vector<std::pair<int, int>> index_pairs;
    for (size_t i = 0; i < ids.size(); ++i)
        for (size_t j = 0; j < ids.size(); ++j)
            if (i != j) index_pairs.push_back({static_cast<int>(i), static_cast<int>(j)});
    if (max_pairs > 0 && static_cast<int64_t>(index_pairs.size()) > max_pairs) {
        Rng rng(hash_combine(seed, 0x7061697273ULL)); // "pairs"
        for (size_t i = index_pairs.size() - 1; i > 0; --i)
            std::swap(index_pairs[i], index_pairs[rng.uniform_int(static_cast<int>(i) + 1)]);
        index_pairs.resize(max_pairs);
    }
    std::vector<Volume<T>> vols;
    std::vector<LabelMap> labels;
    for (const auto& id : ids) {
        vols.push_back(detail::load_any<T>(m.volume_path(dir, id), m.format));
        labels.push_back(detail::load_any<int16_t>(m.labels_path(dir, id), m.format));
    }
    std::vector<EvalPair<T>> pairs;
    pairs.reserve(index_pairs.size());
    for (const auto& [i, j] : index_pairs)
        pairs.push_back(EvalPair<T>{vols[i], vols[j], labels[i], labels[j]});
    return pairs;
}

} // namespace cfreg
