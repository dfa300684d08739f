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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "cfreg/errors.hpp"
#include "cfreg/model.hpp"
#include "cfreg/raw_io.hpp"

namespace cfreg {

/// Training progress stored alongside the parameters.
struct CheckpointMeta {
    int64_t iteration = 0;
    uint64_t seed = 0;
    double best_val_dsc = -1.0;
    int64_t best_val_iteration = -1;
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'C', 'F', 'R', 'E', 'G', 'C', 'K', 'P'};
inline constexpr uint32_t kCkptVersion = 1;

template <typename P>
void append_pod(std::string& buf, const P& v) {
    static_assert(std::is_trivially_copyable_v<P>);
    buf.append(reinterpret_cast<const char*>(&v), sizeof(P));
}

inline void append_str(std::string& buf, const std::string& s) {
    append_pod(buf, static_cast<uint32_t>(s.size()));
    buf.append(s);
}

struct CkptReader {
    const std::string& buf;
    size_t pos = 0;

    template <typename P>
    P pod() {
        static_assert(std::is_trivially_copyable_v<P>);
        if (pos + sizeof(P) > buf.size())
            throw FormatError("checkpoint: truncated file");
        P v;
        std::memcpy(&v, buf.data() + pos, sizeof(P));
        pos += sizeof(P);
        return v;
    }

    std::string str() {
        const uint32_t n = pod<uint32_t>();
        if (pos + n > buf.size()) throw FormatError("checkpoint: truncated string");
        std::string s(buf.data() + pos, n);
        pos += n;
        return s;
    }

    template <typename T>
    void tensor_data(Tensor<T>& t) {
        const size_t bytes = static_cast<size_t>(t.size()) * sizeof(T);
        if (pos + bytes > buf.size()) throw FormatError("checkpoint: truncated tensor");
        std::memcpy(t.data(), buf.data() + pos, bytes);
        pos += bytes;
    }
};

inline void append_config(std::string& buf, const ModelConfig& cfg) {
    append_pod(buf, static_cast<int32_t>(cfg.L));
    for (int c : cfg.enc_channels) append_pod(buf, static_cast<int32_t>(c));
    for (int c : cfg.dec_channels) append_pod(buf, static_cast<int32_t>(c));
    append_pod(buf, cfg.leaky_slope);
    append_pod(buf, cfg.head_init_scale);
    append_pod(buf, static_cast<int32_t>(cfg.ncc_window));
    append_pod(buf, cfg.sigma);
    append_pod(buf, cfg.lambda);
}

inline ModelConfig read_config(CkptReader& r) {
    ModelConfig cfg;
    cfg.L = r.pod<int32_t>();
    for (int& c : cfg.enc_channels) c = r.pod<int32_t>();
    for (int& c : cfg.dec_channels) c = r.pod<int32_t>();
    cfg.leaky_slope = r.pod<double>();
    cfg.head_init_scale = r.pod<double>();
    cfg.ncc_window = r.pod<int32_t>();
    cfg.sigma = r.pod<double>();
    cfg.lambda = r.pod<double>();
    return cfg;
}

} // namespace detail

/// Serializes parameters, optimizer moments, config, and progress; the write
/// is atomic (temp file + rename).
template <typename T>
void save_checkpoint(const std::string& path, const RegistrationModel<T>& model,
                     const CheckpointMeta& meta) {
    std::string buf;
    buf.append(detail::kCkptMagic, sizeof(detail::kCkptMagic));
    detail::append_pod(buf, detail::kCkptVersion);
    detail::append_config(buf, model.config());
    detail::append_pod(buf, static_cast<uint32_t>(sizeof(T)));
    detail::append_pod(buf, meta.iteration);
    detail::append_pod(buf, meta.seed);
    detail::append_pod(buf, meta.best_val_dsc);
    detail::append_pod(buf, meta.best_val_iteration);
    detail::append_pod(buf, static_cast<uint32_t>(model.params().size()));
    for (const auto& p : model.params()) {
        detail::append_str(buf, p.name);
        for (int s : p.value.shape()) detail::append_pod(buf, static_cast<int32_t>(s));
        buf.append(reinterpret_cast<const char*>(p.value.data()),
                   static_cast<size_t>(p.value.size()) * sizeof(T));
        buf.append(reinterpret_cast<const char*>(p.adam_m.data()),
                   static_cast<size_t>(p.adam_m.size()) * sizeof(T));
        buf.append(reinterpret_cast<const char*>(p.adam_v.data()),
                   static_cast<size_t>(p.adam_v.size()) * sizeof(T));
    }
    detail::atomic_write(path, buf.data(), buf.size());
}

/// Reads only the architecture stored in a checkpoint, so callers can
/// construct a matching model before loading the parameters.
inline ModelConfig read_checkpoint_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    std::string buf(sizeof(detail::kCkptMagic) + sizeof(uint32_t) + 13 * sizeof(int32_t) +
                        4 * sizeof(double),
                    '\0');
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    buf.resize(static_cast<size_t>(in.gcount()));
    detail::CkptReader r{buf};
    char magic[8];
    for (char& c : magic) c = r.pod<char>();
    if (std::memcmp(magic, detail::kCkptMagic, 8) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const uint32_t version = r.pod<uint32_t>();
    if (version != detail::kCkptVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    return detail::read_config(r);
}

/// Restores a checkpoint into `model`. The stored architecture and dtype
/// must match the model's; mismatches raise ConfigError.
template <typename T>
CheckpointMeta load_checkpoint(const std::string& path, RegistrationModel<T>& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    detail::CkptReader r{buf};
    char magic[8];
    for (char& c : magic) c = r.pod<char>();
    if (std::memcmp(magic, detail::kCkptMagic, 8) != 0)
        throw FormatError("checkpoint: bad magic in " + path);
    const uint32_t version = r.pod<uint32_t>();
    if (version != detail::kCkptVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    const ModelConfig stored = detail::read_config(r);
    if (!stored.same_architecture(model.config()))
        throw ConfigError("checkpoint: stored architecture (L=" + std::to_string(stored.L) +
                          ") does not match the configured model");
    const uint32_t tsize = r.pod<uint32_t>();
    if (tsize != sizeof(T))
        throw ConfigError("checkpoint: stored scalar width " + std::to_string(tsize) +
                          " does not match the model's " + std::to_string(sizeof(T)));
    CheckpointMeta meta;
    meta.iteration = r.pod<int64_t>();
    meta.seed = r.pod<uint64_t>();
    meta.best_val_dsc = r.pod<double>();
    meta.best_val_iteration = r.pod<int64_t>();
    const uint32_t nparams = r.pod<uint32_t>();
    if (nparams != model.params().size())
        throw ConfigError("checkpoint: parameter count mismatch");
    for (auto& p : model.params()) {
        const std::string name = r.str();
        if (name != p.name)
            throw ConfigError("checkpoint: parameter order mismatch at " + p.name);
        std::array<int, 4> shape{};
        for (int& s : shape) s = r.pod<int32_t>();
        if (shape != p.value.shape())
            throw ConfigError("checkpoint: shape mismatch for " + p.name);
        r.tensor_data(p.value);
        r.tensor_data(p.adam_m);
        r.tensor_data(p.adam_v);
    }
    return meta;
}

/// Checkpoint-directory helpers: files named ckpt_<iteration>.bin plus a
/// `latest` marker holding the newest file name.
inline std::string checkpoint_name(int64_t iteration) {
    return "ckpt_" + std::to_string(iteration) + ".bin";
}

inline void write_latest_marker(const std::string& dir, int64_t iteration) {
    detail::atomic_write_text((std::filesystem::path(dir) / "latest").string(),
                              checkpoint_name(iteration) + "\n");
}

inline std::string resolve_latest(const std::string& dir) {
    const auto marker = std::filesystem::path(dir) / "latest";
    std::ifstream in(marker);
    if (!in) throw IoError("checkpoint: no latest marker in " + dir);
    std::string name;
    std::getline(in, name);
    if (name.empty()) throw FormatError("checkpoint: empty latest marker in " + dir);
    return (std::filesystem::path(dir) / name).string();
}

} // namespace cfreg
