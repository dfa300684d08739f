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
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "cfreg/errors.hpp"
#include "cfreg/tensor.hpp"

namespace cfreg {

namespace detail {

template <typename T> struct DtypeName;
template <> struct DtypeName<float>    { static constexpr const char* value = "float32"; };
template <> struct DtypeName<double>   { static constexpr const char* value = "float64"; };
template <> struct DtypeName<int16_t>  { static constexpr const char* value = "int16"; };
template <> struct DtypeName<int32_t>  { static constexpr const char* value = "int32"; };
template <> struct DtypeName<uint8_t>  { static constexpr const char* value = "uint8"; };

inline size_t dtype_size(const std::string& name) {
    if (name == "float32") return 4;
    if (name == "float64") return 8;
    if (name == "int16") return 2;
    if (name == "int32") return 4;
    if (name == "uint8") return 1;
    throw UnsupportedDtypeError("raw: unsupported dtype '" + name + "'");
}

/// Write-temp-then-rename so that readers never observe partial files.
inline void atomic_write(const std::string& path, const void* data, size_t bytes) {
    namespace fs = std::filesystem;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open for writing: " + tmp);
        f.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
        if (!f) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + tmp + " -> " + path + ": " + ec.message());
}

inline void atomic_write_text(const std::string& path, const std::string& text) {
    atomic_write(path, text.data(), text.size());
}

template <typename Src, typename T>
void read_cast(std::ifstream& f, Tensor<T>& out) {
    std::vector<Src> buf(static_cast<size_t>(out.size()));
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(Src)));
    if (!f) throw FormatError("raw: truncated data blob");
    for (int64_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(buf[i]);
}

} // namespace detail

/// Raw format: little-endian binary blob `path` plus plain-text sidecar
/// `path.desc` with lines
///   dtype: float32
///   shape: D H W
///   channels: C
///   order: w-fastest channel-major
/// Multi-channel data is stored channel-major (all of channel 0, then 1, ...).
template <typename T>
void save_raw(const Tensor<T>& t, const std::string& path) {
    std::ostringstream desc;
    desc << "dtype: " << detail::DtypeName<T>::value << "\n"
         << "shape: " << t.depth() << " " << t.height() << " " << t.width() << "\n"
         << "channels: " << t.channels() << "\n"
         << "order: w-fastest channel-major\n";
    detail::atomic_write(path, t.data(), static_cast<size_t>(t.size()) * sizeof(T));
    detail::atomic_write_text(path + ".desc", desc.str());
}

template <typename T>
Tensor<T> load_raw(const std::string& path) {
    std::ifstream df(path + ".desc");
    if (!df) throw IoError("missing descriptor: " + path + ".desc");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(df, line)) {
        auto colon = line.find(':');
        if (colon == std::string::npos) continue;
        std::string key = line.substr(0, colon);
        std::string val = line.substr(colon + 1);
        auto trim = [](std::string s) {
            const char* ws = " \t\r";
            s.erase(0, s.find_first_not_of(ws));
            auto end = s.find_last_not_of(ws);
            s.erase(end == std::string::npos ? 0 : end + 1);
            return s;
        };
        kv[trim(key)] = trim(val);
    }
    if (!kv.count("dtype") || !kv.count("shape"))
        throw FormatError("raw: descriptor missing dtype/shape: " + path + ".desc");
    int D, H, W, C = 1;
    {
        std::istringstream ss(kv["shape"]);
        if (!(ss >> D >> H >> W)) throw FormatError("raw: bad shape line: " + kv["shape"]);
    }
    if (kv.count("channels")) C = std::stoi(kv["channels"]);
    if (C < 1 || D < 1 || H < 1 || W < 1) throw FormatError("raw: non-positive dims");

    const std::string dtype = kv["dtype"];
    const size_t elem = detail::dtype_size(dtype);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<size_t>(f.tellg());
    f.seekg(0);
    const size_t expect = static_cast<size_t>(C) * D * H * W * elem;
    if (bytes != expect)
        throw FormatError("raw: blob size " + std::to_string(bytes) + " != expected " +
                          std::to_string(expect) + " for " + path);

    Tensor<T> out(C, D, H, W);
    if (dtype == "float32") detail::read_cast<float>(f, out);
    else if (dtype == "float64") detail::read_cast<double>(f, out);
    else if (dtype == "int16") detail::read_cast<int16_t>(f, out);
    else if (dtype == "int32") detail::read_cast<int32_t>(f, out);
    else if (dtype == "uint8") detail::read_cast<uint8_t>(f, out);
    else throw UnsupportedDtypeError("raw: unsupported dtype '" + dtype + "'");
    return out;
}

} // namespace cfreg
