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

// cfreg command line: synth | train | register | evaluate | ablate | report.
// All settings live in one JSON config file (see configs/default.json for
// every key); command-line flags override file values.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfreg/cfreg.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using Scalar = float;

namespace {

struct AppConfig {
    // data (synth inputs / dataset location)
    std::string data_dir = "data";
    std::vector<int> shape{48, 48, 48};
    int n_blobs = 6, n_train = 30, n_val = 4, n_test = 5;
    double max_disp = 2.0;
    uint64_t data_seed = 7;
    std::string format = "nifti";
    // model
    cfreg::ModelConfig model;
    std::vector<int> enc_stage, dec_stage; // CLI/JSON staging for the arrays
    // train
    cfreg::TrainConfig train;
    std::string run_dir = "runs/base";
    bool resume = false;
    // eval
    int64_t eval_pairs = 20;
    std::string split = "test";
    bool pooled_dsc = false;
    bool exclude_pyramid_time = false;
    // ablate
    std::vector<int> ablate_levels{1, 3};
    std::vector<double> ablate_lambdas{0.0};

    void finalize() {
        auto to5 = [](const std::vector<int>& v, const char* what) {
            if (v.size() != 5)
                throw cfreg::ConfigError(std::string(what) + " needs exactly 5 entries");
            std::array<int, 5> a;
            std::copy(v.begin(), v.end(), a.begin());
            return a;
        };
        if (!enc_stage.empty()) model.enc_channels = to5(enc_stage, "enc_channels");
        if (!dec_stage.empty()) model.dec_channels = to5(dec_stage, "dec_channels");
        if (shape.size() != 3) throw cfreg::ConfigError("shape needs exactly 3 entries");
    }
    std::array<int, 3> shape3() const { return {shape[0], shape[1], shape[2]}; }
};

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw cfreg::ConfigError("config: unknown key \"" + key + "\" in section \"" +
                                     section + "\"");
    }
}

template <typename V>
void get_to_if(const json& j, const char* key, V& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

void apply_config_file(AppConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cfreg::ConfigError("config: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw cfreg::ConfigError("config: bad JSON in " + path + ": " + e.what());
    }
    check_keys(j, "top level", {"data", "model", "loss", "train", "eval", "ablate"});
    if (j.contains("data")) {
        const json& d = j["data"];
        check_keys(d, "data",
                   {"dir", "format", "shape", "n_blobs", "n_train", "n_val", "n_test",
                    "max_disp", "seed"});
        get_to_if(d, "dir", c.data_dir);
        get_to_if(d, "format", c.format);
        get_to_if(d, "shape", c.shape);
        get_to_if(d, "n_blobs", c.n_blobs);
        get_to_if(d, "n_train", c.n_train);
        get_to_if(d, "n_val", c.n_val);
        get_to_if(d, "n_test", c.n_test);
        get_to_if(d, "max_disp", c.max_disp);
        get_to_if(d, "seed", c.data_seed);
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, "model",
                   {"levels", "enc_channels", "dec_channels", "leaky_slope", "head_init_scale"});
        get_to_if(m, "levels", c.model.L);
        get_to_if(m, "enc_channels", c.enc_stage);
        get_to_if(m, "dec_channels", c.dec_stage);
        get_to_if(m, "leaky_slope", c.model.leaky_slope);
        get_to_if(m, "head_init_scale", c.model.head_init_scale);
    }
    if (j.contains("loss")) {
        const json& l = j["loss"];
        check_keys(l, "loss", {"sigma", "lambda", "ncc_window"});
        get_to_if(l, "sigma", c.model.sigma);
        get_to_if(l, "lambda", c.model.lambda);
        get_to_if(l, "ncc_window", c.model.ncc_window);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        check_keys(t, "train",
                   {"lr", "iterations", "seed", "val_interval", "val_pairs",
                    "checkpoint_interval", "out_dir", "resume"});
        get_to_if(t, "lr", c.train.lr);
        get_to_if(t, "iterations", c.train.iterations);
        get_to_if(t, "seed", c.train.seed);
        get_to_if(t, "val_interval", c.train.val_interval);
        get_to_if(t, "val_pairs", c.train.val_pairs);
        get_to_if(t, "checkpoint_interval", c.train.checkpoint_interval);
        get_to_if(t, "out_dir", c.run_dir);
        get_to_if(t, "resume", c.resume);
    }
    if (j.contains("eval")) {
        const json& e = j["eval"];
        check_keys(e, "eval", {"pairs", "split", "pooled_dsc", "exclude_pyramid_time"});
        get_to_if(e, "pairs", c.eval_pairs);
        get_to_if(e, "split", c.split);
        get_to_if(e, "pooled_dsc", c.pooled_dsc);
        get_to_if(e, "exclude_pyramid_time", c.exclude_pyramid_time);
    }
    if (j.contains("ablate")) {
        const json& a = j["ablate"];
        check_keys(a, "ablate", {"levels", "lambdas"});
        get_to_if(a, "levels", c.ablate_levels);
        get_to_if(a, "lambdas", c.ablate_lambdas);
    }
}

// ---- shared helpers -------------------------------------------------------

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

template <typename T>
cfreg::Tensor<T> load_auto(const std::string& path) {
    if (has_suffix(path, ".raw")) return cfreg::load_raw<T>(path);
    return cfreg::load_nifti<T>(path);
}

template <typename T>
void save_auto(const cfreg::Tensor<T>& t, const std::string& path) {
    if (has_suffix(path, ".raw"))
        cfreg::save_raw(t, path);
    else
        cfreg::save_nifti(t, path);
}

std::string pick_checkpoint(const std::string& checkpoint, const std::string& run) {
    if (!checkpoint.empty()) return checkpoint;
    if (!run.empty()) return cfreg::resolve_latest((fs::path(run) / "checkpoints").string());
    throw cfreg::ConfigError("need --checkpoint FILE or --run DIR");
}

cfreg::RegistrationModel<Scalar> load_model(const std::string& ckpt_path) {
    const cfreg::ModelConfig mc = cfreg::read_checkpoint_config(ckpt_path);
    cfreg::RegistrationModel<Scalar> model(mc, 0);
    cfreg::load_checkpoint(ckpt_path, model);
    return model;
}

const std::vector<std::string>& split_ids(const cfreg::DatasetManifest& m,
                                          const std::string& split) {
    if (split == "train") return m.train;
    if (split == "val") return m.val;
    if (split == "test") return m.test;
    throw cfreg::ConfigError("split must be train, val, or test (got \"" + split + "\")");
}

int round_up16(int n) { return (n + 15) / 16 * 16; }

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw cfreg::FormatError("csv: missing column \"" + name + "\"");
    }
    double num(size_t row, int c) const { return std::strtod(rows[row][c].c_str(), nullptr); }
};

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw cfreg::IoError("csv: cannot open " + path);
    CsvTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        size_t pos = 0;
        while (true) {
            const size_t comma = line.find(',', pos);
            cells.push_back(line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (t.header.empty())
            t.header = std::move(cells);
        else
            t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw cfreg::FormatError("csv: empty file " + path);
    return t;
}

// ---- subcommands ----------------------------------------------------------

void cmd_synth(AppConfig& c) {
    cfreg::SynthConfig s;
    s.shape = c.shape3();
    s.n_blobs = c.n_blobs;
    s.n_train = c.n_train;
    s.n_val = c.n_val;
    s.n_test = c.n_test;
    s.max_disp = c.max_disp;
    s.seed = c.data_seed;
    s.format = c.format;
    const auto m = cfreg::synth_dataset<Scalar>(s, c.data_dir, &std::cout);
    std::cout << "wrote dataset to " << c.data_dir << ": " << m.train.size() << " train, "
              << m.val.size() << " val, " << m.test.size() << " test subjects ("
              << m.shape[0] << "x" << m.shape[1] << "x" << m.shape[2] << ", " << m.format
              << ")" << std::endl;
}

void cmd_train(AppConfig& c) {
    c.model.validate();
    c.train.validate();
    const auto m = cfreg::DatasetManifest::load(c.data_dir);
    const auto train_set = cfreg::load_split_volumes<Scalar>(m, c.data_dir, m.train);
    std::vector<cfreg::EvalPair<Scalar>> val_pairs;
    if (m.val.size() >= 2 && c.train.val_pairs > 0)
        val_pairs =
            cfreg::load_pairs<Scalar>(m, c.data_dir, m.val, c.train.val_pairs, c.train.seed);
    cfreg::RegistrationModel<Scalar> model(c.model, c.train.seed);
    std::cout << "training L=" << c.model.L << " lambda=" << c.model.lambda << " ("
              << cfreg::param_count(c.model) << " parameters) on " << train_set.size()
              << " volumes" << std::endl;
    const auto res =
        cfreg::train_loop(model, c.train, train_set, val_pairs, c.run_dir, c.resume, &std::cout);
    std::cout << "ran " << res.iterations_run << " iterations; checkpoint "
              << res.final_checkpoint;
    if (res.best_val_iteration >= 0)
        std::cout << "; best val DSC " << res.best_val_dsc << " at iteration "
                  << res.best_val_iteration;
    std::cout << std::endl;
}

struct RegisterArgs {
    std::string fixed, moving, fixed_labels, moving_labels;
    std::string checkpoint, run, out_dir = "register_out";
    bool emit_intermediate = false;
};

void cmd_register(const RegisterArgs& a, const AppConfig& c) {
    const auto model = load_model(pick_checkpoint(a.checkpoint, a.run));
    const int L = model.config().L;
    const int window = model.config().ncc_window;
    const cfreg::Volume<Scalar> fixed = load_auto<Scalar>(a.fixed);
    const cfreg::Volume<Scalar> moving = load_auto<Scalar>(a.moving);
    if (!fixed.same_spatial_shape(moving))
        throw cfreg::ShapeError("register: fixed " + fixed.shape_str() + " vs moving " +
                                moving.shape_str());
    const std::array<int, 3> orig = fixed.spatial_shape();
    const std::array<int, 3> padded{round_up16(orig[0]), round_up16(orig[1]),
                                    round_up16(orig[2])};
    const cfreg::Volume<Scalar> fixed_p = cfreg::pad_replicate(fixed, padded);
    const cfreg::Volume<Scalar> moving_p = cfreg::pad_replicate(moving, padded);

    const auto t0 = std::chrono::steady_clock::now();
    const auto out = model.register_pair(fixed_p, moving_p);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const cfreg::DisplacementField<Scalar>& field_p = out.final_field();
    const cfreg::DisplacementField<Scalar> field = cfreg::crop_center(field_p, orig);
    const cfreg::Volume<Scalar> warped =
        cfreg::crop_center(cfreg::warp_trilinear(moving_p, field_p), orig);

    fs::create_directories(a.out_dir);
    const std::string ext = c.format == "raw" ? ".raw" : ".nii";
    auto out_path = [&](const std::string& stem) {
        return (fs::path(a.out_dir) / (stem + ext)).string();
    };
    save_auto(field, out_path("field"));
    save_auto(warped, out_path("warped"));

    json metrics;
    metrics["fixed"] = a.fixed;
    metrics["moving"] = a.moving;
    metrics["shape"] = orig;
    metrics["padded_shape"] = padded;
    metrics["seconds"] = seconds;
    metrics["ncc_before"] = double(cfreg::local_ncc(moving, fixed, window));
    metrics["ncc_after"] = double(cfreg::local_ncc(warped, fixed, window));
    metrics["njd_percent"] = cfreg::njd_percent(field);

    if (!a.moving_labels.empty()) {
        const cfreg::LabelMap mov_lab = load_auto<int16_t>(a.moving_labels);
        const cfreg::LabelMap mov_lab_p = cfreg::pad_replicate(mov_lab, padded);
        const cfreg::LabelMap warped_lab =
            cfreg::crop_center(cfreg::warp_nearest(mov_lab_p, field_p), orig);
        save_auto(warped_lab, out_path("warped_labels"));
        if (!a.fixed_labels.empty()) {
            const cfreg::LabelMap fix_lab = load_auto<int16_t>(a.fixed_labels);
            const auto labels = cfreg::labels_in(fix_lab);
            metrics["dsc_before"] = cfreg::dsc(fix_lab, mov_lab, labels).mean;
            metrics["dsc_after"] = cfreg::dsc(fix_lab, warped_lab, labels).mean;
        }
    }

    // Step-wise refinement: each intermediate field applied to the matching
    // pyramid level of the (padded) moving image.
    const auto fix_pyr = cfreg::build_pyramid(fixed_p, L);
    const auto mov_pyr = cfreg::build_pyramid(moving_p, L);
    json steps = json::array();
    for (int i = 1; i <= L; ++i) {
        const cfreg::Volume<Scalar> w = cfreg::warp_trilinear(mov_pyr.level(i), out.phi[i - 1]);
        const double ncc = double(cfreg::local_ncc(w, fix_pyr.level(i), window));
        steps.push_back({{"step", i},
                         {"grid", w.spatial_shape()},
                         {"ncc", ncc}});
        if (a.emit_intermediate) {
            const std::string stem = "step_" + std::to_string(i);
            save_auto(w, (fs::path(a.out_dir) / (stem + ext)).string());
            cfreg::slice_canvas(w).save_bmp((fs::path(a.out_dir) / (stem + ".bmp")).string());
        }
    }
    metrics["steps"] = steps;
    if (a.emit_intermediate) {
        cfreg::slice_canvas(fixed).save_bmp((fs::path(a.out_dir) / "fixed.bmp").string());
        cfreg::slice_canvas(moving).save_bmp((fs::path(a.out_dir) / "moving.bmp").string());
        cfreg::slice_canvas(warped).save_bmp((fs::path(a.out_dir) / "warped.bmp").string());
    }
    cfreg::detail::atomic_write_text((fs::path(a.out_dir) / "metrics.json").string(),
                                     metrics.dump(2) + "\n");
    std::cout << "registered in " << seconds << " s: NCC " << metrics["ncc_before"] << " -> "
              << metrics["ncc_after"] << ", NJD " << metrics["njd_percent"] << "%" << std::endl;
    std::cout << "outputs in " << a.out_dir << std::endl;
}

struct EvalArgs {
    std::string checkpoint, run, out_dir = "eval_out";
};

void cmd_evaluate(const EvalArgs& a, AppConfig& c) {
    const auto m = cfreg::DatasetManifest::load(c.data_dir);
    const auto pairs =
        cfreg::load_pairs<Scalar>(m, c.data_dir, split_ids(m, c.split), c.eval_pairs, m.seed);
    const auto model = load_model(pick_checkpoint(a.checkpoint, a.run));
    const auto rep = cfreg::evaluate(model, pairs, c.pooled_dsc, c.exclude_pyramid_time);
    const int L = model.config().L;

    const std::string timing_note =
        c.exclude_pyramid_time
            ? "timing: register call minus separately measured pyramid construction"
            : "timing: full register call (pyramid construction included, I/O excluded)";
    std::string csv = "# " + timing_note + "\n";
    csv += "pair,baseline_dsc,dsc,baseline_ncc,ncc,njd,seconds";
    for (int i = 1; i <= L; ++i) csv += ",step_ncc_" + std::to_string(i);
    csv += "\n";
    for (size_t p = 0; p < rep.pairs.size(); ++p) {
        const auto& pe = rep.pairs[p];
        csv += std::to_string(p) + "," + cfreg::detail::fmt_g(pe.baseline_dsc) + "," +
               cfreg::detail::fmt_g(pe.final_dsc) + "," + cfreg::detail::fmt_g(pe.baseline_ncc) +
               "," + cfreg::detail::fmt_g(pe.final_ncc) + "," + cfreg::detail::fmt_g(pe.njd) +
               "," + cfreg::detail::fmt_g(pe.seconds);
        for (double v : pe.step_ncc) csv += "," + cfreg::detail::fmt_g(v);
        csv += "\n";
    }
    fs::create_directories(a.out_dir);
    cfreg::detail::atomic_write_text((fs::path(a.out_dir) / "eval.csv").string(), csv);

    json j;
    j["timing"] = timing_note;
    j["pairs"] = rep.pairs.size();
    j["split"] = c.split;
    j["pooled_dsc"] = c.pooled_dsc;
    j["mean_baseline_dsc"] = rep.mean_baseline_dsc;
    j["mean_dsc"] = rep.mean_dsc;
    j["std_dsc"] = rep.std_dsc;
    j["mean_baseline_ncc"] = rep.mean_baseline_ncc;
    j["mean_ncc"] = rep.mean_ncc;
    j["std_ncc"] = rep.std_ncc;
    j["mean_njd"] = rep.mean_njd;
    j["std_njd"] = rep.std_njd;
    j["mean_seconds"] = rep.mean_seconds;
    j["std_seconds"] = rep.std_seconds;
    j["mean_step_ncc"] = rep.mean_step_ncc;
    cfreg::detail::atomic_write_text((fs::path(a.out_dir) / "eval.json").string(),
                                     j.dump(2) + "\n");

    std::cout << "evaluated " << rep.pairs.size() << " " << c.split << " pairs\n"
              << "  DSC " << rep.mean_baseline_dsc << " -> " << rep.mean_dsc << " (std "
              << rep.std_dsc << ")\n"
              << "  NCC " << rep.mean_baseline_ncc << " -> " << rep.mean_ncc << " (std "
              << rep.std_ncc << ")\n"
              << "  NJD " << rep.mean_njd << "% (std " << rep.std_njd << ")\n"
              << "  seconds/registration " << rep.mean_seconds << " (std " << rep.std_seconds
              << ")\n  per-step NCC:";
    for (double v : rep.mean_step_ncc) std::cout << " " << v;
    std::cout << "\nreports in " << a.out_dir << std::endl;
}

void cmd_ablate(AppConfig& c) {
    c.model.validate();
    c.train.validate();
    const auto m = cfreg::DatasetManifest::load(c.data_dir);
    const auto train_set = cfreg::load_split_volumes<Scalar>(m, c.data_dir, m.train);
    std::vector<cfreg::EvalPair<Scalar>> val_pairs;
    if (m.val.size() >= 2 && c.train.val_pairs > 0)
        val_pairs =
            cfreg::load_pairs<Scalar>(m, c.data_dir, m.val, c.train.val_pairs, c.train.seed);
    const auto test_pairs =
        cfreg::load_pairs<Scalar>(m, c.data_dir, m.test, c.eval_pairs, m.seed);
    const auto rows = cfreg::ablate(c.model, c.train, c.ablate_levels, c.ablate_lambdas,
                                    train_set, val_pairs, test_pairs, c.run_dir, &std::cout);
    const std::string csv = cfreg::ablate_csv(rows);
    fs::create_directories(c.run_dir);
    cfreg::detail::atomic_write_text((fs::path(c.run_dir) / "ablate.csv").string(), csv);
    std::cout << csv << "table in " << (fs::path(c.run_dir) / "ablate.csv").string()
              << std::endl;
}

struct ReportArgs {
    std::string run, eval_csv, ablate_csv, out_dir = "report_out";
};

void cmd_report(const ReportArgs& a) {
    if (a.run.empty() && a.eval_csv.empty() && a.ablate_csv.empty())
        throw cfreg::ConfigError("report: need at least one of --run, --eval, --ablate");
    fs::create_directories(a.out_dir);
    std::vector<std::string> written;
    auto emit = [&](const cfreg::Canvas& cv, const std::string& name) {
        const std::string path = (fs::path(a.out_dir) / name).string();
        cv.save_bmp(path);
        written.push_back(path);
    };

    if (!a.run.empty()) {
        const auto t = read_csv((fs::path(a.run) / "metrics.csv").string());
        const int it_col = t.col("iteration");
        auto column = [&](int col) {
            std::vector<double> v;
            for (size_t r = 0; r < t.rows.size(); ++r) v.push_back(t.num(r, col));
            return v;
        };
        const std::vector<double> its = column(it_col);
        emit(cfreg::plot_lines({{"total", its, column(t.col("total"))}}, "training loss",
                               "iteration", "loss"),
             "loss_total.bmp");
        std::vector<cfreg::Series> sims;
        for (int i = 1;; ++i) {
            const std::string name = "sim_" + std::to_string(i);
            if (std::find(t.header.begin(), t.header.end(), name) == t.header.end()) break;
            sims.push_back({name, its, column(t.col(name))});
        }
        emit(cfreg::plot_lines(sims, "similarity loss per level", "iteration", "sim"),
             "loss_sim.bmp");
        const auto vpath = (fs::path(a.run) / "validation.csv").string();
        if (fs::exists(vpath)) {
            const auto v = read_csv(vpath);
            if (!v.rows.empty()) {
                auto vcolumn = [&](const char* n) {
                    std::vector<double> out;
                    const int col = v.col(n);
                    for (size_t r = 0; r < v.rows.size(); ++r) out.push_back(v.num(r, col));
                    return out;
                };
                const auto vits = vcolumn("iteration");
                emit(cfreg::plot_lines({{"ncc", vits, vcolumn("mean_ncc")},
                                        {"dsc", vits, vcolumn("mean_dsc")}},
                                       "validation", "iteration", "metric"),
                     "validation.bmp");
                emit(cfreg::plot_lines({{"njd", vits, vcolumn("mean_njd")}}, "validation NJD",
                                       "iteration", "percent"),
                     "validation_njd.bmp");
            }
        }
    }
    if (!a.eval_csv.empty()) {
        const auto t = read_csv(a.eval_csv);
        std::vector<double> step_x, step_y;
        for (int i = 1;; ++i) {
            const std::string name = "step_ncc_" + std::to_string(i);
            if (std::find(t.header.begin(), t.header.end(), name) == t.header.end()) break;
            const int col = t.col(name);
            double mean = 0;
            for (size_t r = 0; r < t.rows.size(); ++r) mean += t.num(r, col);
            step_x.push_back(i);
            step_y.push_back(mean / double(t.rows.size()));
        }
        if (step_x.empty()) throw cfreg::FormatError("report: no step_ncc_* columns in eval csv");
        emit(cfreg::plot_lines({{"mean ncc", step_x, step_y}}, "per-step NCC", "step", "ncc"),
             "step_ncc.bmp");
    }
    if (!a.ablate_csv.empty()) {
        const auto t = read_csv(a.ablate_csv);
        std::vector<std::string> labels;
        std::vector<double> dscs, njds;
        const int lc = t.col("L"), lamc = t.col("lambda"), dc = t.col("dsc"), nc = t.col("njd");
        const int ec = t.col("error");
        for (size_t r = 0; r < t.rows.size(); ++r) {
            if (!t.rows[r][ec].empty()) continue; // failed cells have no metrics
            labels.push_back("L" + t.rows[r][lc] + " l=" + t.rows[r][lamc]);
            dscs.push_back(t.num(r, dc));
            njds.push_back(t.num(r, nc));
        }
        if (labels.empty()) throw cfreg::DataError("report: no successful ablation rows");
        emit(cfreg::plot_bars(labels, dscs, "ablation DSC", "dsc"), "ablate_dsc.bmp");
        emit(cfreg::plot_bars(labels, njds, "ablation NJD", "percent"), "ablate_njd.bmp");
    }
    for (const auto& p : written) std::cout << "wrote " << p << "\n";
}

} // namespace

int main(int argc, char** argv) {
    AppConfig cfg;
    // The config file applies first so that explicit flags win.
    for (int i = 1; i < argc - 1; ++i) {
        const std::string arg = argv[i];
        if (arg == "-c" || arg == "--config") {
            try {
                apply_config_file(cfg, argv[i + 1]);
            } catch (const cfreg::Error& e) {
                std::cerr << "error: " << e.what() << std::endl;
                return 2;
            }
            break;
        }
    }

    CLI::App app{"single-pass coarse-to-fine deformable 3D registration"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON config file (flags override its values)");

    auto add_data_opts = [&](CLI::App* sub) {
        sub->add_option("--data", cfg.data_dir, "dataset directory (with manifest.json)");
    };
    auto add_model_opts = [&](CLI::App* sub) {
        sub->add_option("--levels", cfg.model.L, "registration steps L (1..5)");
        sub->add_option("--enc-channels", cfg.enc_stage, "encoder channels (5 ints)")
            ->expected(5);
        sub->add_option("--dec-channels", cfg.dec_stage, "decoder channels (5 ints)")
            ->expected(5);
        sub->add_option("--leaky-slope", cfg.model.leaky_slope, "LeakyReLU negative slope");
        sub->add_option("--head-init-scale", cfg.model.head_init_scale,
                        "stddev of displacement-head init");
        sub->add_option("--sigma", cfg.model.sigma, "regularization weight");
        sub->add_option("--lambda", cfg.model.lambda, "folding-penalty weight");
        sub->add_option("--ncc-window", cfg.model.ncc_window, "local NCC window (odd)");
    };
    auto add_train_opts = [&](CLI::App* sub) {
        sub->add_option("--lr", cfg.train.lr, "ADAM learning rate");
        sub->add_option("--iterations", cfg.train.iterations, "training iterations");
        sub->add_option("--seed", cfg.train.seed, "training seed");
        sub->add_option("--val-interval", cfg.train.val_interval, "iterations between validations");
        sub->add_option("--val-pairs", cfg.train.val_pairs, "max validation pairs");
        sub->add_option("--checkpoint-interval", cfg.train.checkpoint_interval,
                        "iterations between checkpoints");
        sub->add_option("--out", cfg.run_dir, "run output directory");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic phantom dataset");
    synth->add_option("--out", cfg.data_dir, "output dataset directory");
    synth->add_option("--shape", cfg.shape, "volume dims D H W (multiples of 16)")->expected(3);
    synth->add_option("--blobs", cfg.n_blobs, "labeled blobs per phantom");
    synth->add_option("--train-subjects", cfg.n_train, "training subjects");
    synth->add_option("--val-subjects", cfg.n_val, "validation subjects");
    synth->add_option("--test-subjects", cfg.n_test, "test subjects");
    synth->add_option("--max-disp", cfg.max_disp, "max displacement magnitude (voxels)");
    synth->add_option("--seed", cfg.data_seed, "dataset seed");
    synth->add_option("--format", cfg.format, "nifti or raw");

    CLI::App* train = app.add_subcommand("train", "train a registration model");
    add_data_opts(train);
    add_model_opts(train);
    add_train_opts(train);
    train->add_flag("--resume", cfg.resume, "resume from the latest checkpoint");

    RegisterArgs reg;
    CLI::App* regc = app.add_subcommand("register", "register one moving/fixed pair");
    regc->add_option("--fixed", reg.fixed, "fixed volume (.nii or .raw)")->required();
    regc->add_option("--moving", reg.moving, "moving volume (.nii or .raw)")->required();
    regc->add_option("--fixed-labels", reg.fixed_labels, "fixed label map (optional)");
    regc->add_option("--moving-labels", reg.moving_labels, "moving label map (optional)");
    regc->add_option("--checkpoint", reg.checkpoint, "checkpoint file");
    regc->add_option("--run", reg.run, "run directory (uses its latest checkpoint)");
    regc->add_option("--out", reg.out_dir, "output directory");
    regc->add_option("--format", cfg.format, "output format: nifti or raw");
    regc->add_flag("--emit-intermediate", reg.emit_intermediate,
                   "write per-step warped volumes and mid-slice images");

    EvalArgs ev;
    CLI::App* evalc = app.add_subcommand("evaluate", "score a model on dataset pairs");
    add_data_opts(evalc);
    evalc->add_option("--checkpoint", ev.checkpoint, "checkpoint file");
    evalc->add_option("--run", ev.run, "run directory (uses its latest checkpoint)");
    evalc->add_option("--split", cfg.split, "train, val, or test");
    evalc->add_option("--pairs", cfg.eval_pairs, "max ordered pairs to evaluate");
    evalc->add_option("--out", ev.out_dir, "report output directory");
    evalc->add_flag("--pooled-dsc", cfg.pooled_dsc, "pool voxels over labels instead of mean");
    evalc->add_flag("--exclude-pyramid-time", cfg.exclude_pyramid_time,
                    "subtract pyramid-construction time from timings");

    CLI::App* ablatec = app.add_subcommand("ablate", "train/evaluate an (L, lambda) grid");
    add_data_opts(ablatec);
    add_model_opts(ablatec);
    add_train_opts(ablatec);
    ablatec->add_option("--ablate-levels", cfg.ablate_levels, "L values to sweep");
    ablatec->add_option("--ablate-lambdas", cfg.ablate_lambdas, "lambda values to sweep");
    ablatec->add_option("--pairs", cfg.eval_pairs, "max test pairs per cell");

    ReportArgs rep;
    CLI::App* reportc = app.add_subcommand("report", "render plots from run/eval/ablate tables");
    reportc->add_option("--run", rep.run, "run directory (metrics.csv, validation.csv)");
    reportc->add_option("--eval", rep.eval_csv, "eval.csv from the evaluate subcommand");
    reportc->add_option("--ablate", rep.ablate_csv, "ablate.csv from the ablate subcommand");
    reportc->add_option("--out", rep.out_dir, "plot output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // bad flags are config errors
    }

    try {
        cfg.finalize();
        if (synth->parsed()) cmd_synth(cfg);
        if (train->parsed()) cmd_train(cfg);
        if (regc->parsed()) cmd_register(reg, cfg);
        if (evalc->parsed()) cmd_evaluate(ev, cfg);
        if (ablatec->parsed()) cmd_ablate(cfg);
        if (reportc->parsed()) cmd_report(rep);
    } catch (const cfreg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const cfreg::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << std::endl;
        return 4;
    } catch (const cfreg::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
