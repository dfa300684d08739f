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
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cfreg/errors.hpp"
#include "cfreg/raw_io.hpp"
#include "cfreg/tensor.hpp"

namespace cfreg {

namespace detail {

// NIfTI-1 fixed 348-byte header, little-endian. Only the minimal subset is
// interpreted: dims, datatype, pixdim, vox_offset, scaling, magic, sform.
#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    int32_t extents;
    int16_t session_error;
    char regular;
    char dim_info;
    int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    int16_t intent_code;
    int16_t datatype;
    int16_t bitpix;
    int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    int16_t qform_code;
    int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t kNiftiUint8 = 2;
constexpr int16_t kNiftiInt16 = 4;
constexpr int16_t kNiftiFloat32 = 16;
constexpr int16_t kNiftiIntentVector = 1007;

template <typename T> struct NiftiCode;
template <> struct NiftiCode<uint8_t>  { static constexpr int16_t value = kNiftiUint8;   static constexpr int16_t bits = 8; };
template <> struct NiftiCode<int16_t>  { static constexpr int16_t value = kNiftiInt16;   static constexpr int16_t bits = 16; };
template <> struct NiftiCode<float>    { static constexpr int16_t value = kNiftiFloat32; static constexpr int16_t bits = 32; };

inline bool sform_is_identity(const Nifti1Header& h) {
    const float id[3][4] = {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
    const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c)
            if (std::abs(rows[r][c] - id[r][c]) > 1e-5f) return false;
    return true;
}

} // namespace detail

/// Write a single-file .nii (magic "n+1\0", little-endian, identity affine).
/// Volumes write dim[0] = 3; 3-channel fields write dim[0] = 5 with
/// dim[5] = 3 and the vector intent code, components stored slowest so the
/// in-memory channel-major order maps directly onto the file.
template <typename T>
void save_nifti(const Tensor<T>& t, const std::string& path) {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, int16_t> ||
                      std::is_same_v<T, uint8_t>,
                  "save_nifti supports float32, int16 and uint8");
    if (t.channels() != 1 && t.channels() != 3)
        throw ShapeError("save_nifti: expected 1 or 3 channels, got " + t.shape_str());

    detail::Nifti1Header h;
    std::memset(&h, 0, sizeof(h));
    h.sizeof_hdr = 348;
    h.regular = 'r';
    const bool vector_field = t.channels() == 3;
    h.dim[0] = vector_field ? 5 : 3;
    h.dim[1] = static_cast<int16_t>(t.width());
    h.dim[2] = static_cast<int16_t>(t.height());
    h.dim[3] = static_cast<int16_t>(t.depth());
    h.dim[4] = 1;
    h.dim[5] = static_cast<int16_t>(vector_field ? 3 : 1);
    h.dim[6] = 1;
    h.dim[7] = 1;
    if (vector_field) h.intent_code = detail::kNiftiIntentVector;
    h.datatype = detail::NiftiCode<T>::value;
    h.bitpix = detail::NiftiCode<T>::bits;
    for (int i = 0; i < 8; ++i) h.pixdim[i] = 1.0f;
    h.vox_offset = 352.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.qform_code = 0;
    h.sform_code = 1;
    h.srow_x[0] = 1.0f;
    h.srow_y[1] = 1.0f;
    h.srow_z[2] = 1.0f;
    std::memcpy(h.magic, "n+1\0", 4);

    std::vector<char> blob(sizeof(h) + 4 + static_cast<size_t>(t.size()) * sizeof(T));
    std::memcpy(blob.data(), &h, sizeof(h));
    // 4 bytes of extension padding between header and data (all zero).
    std::memcpy(blob.data() + sizeof(h) + 4, t.data(), static_cast<size_t>(t.size()) * sizeof(T));
    detail::atomic_write(path, blob.data(), blob.size());
}

/// Read a .nii (or .hdr/.img pair with magic "ni1\0"). The affine is read
/// but not applied; a non-identity sform triggers a warning on stderr.
/// Supported datatype codes: uint8 (2), int16 (4), float32 (16).
template <typename T>
Tensor<T> load_nifti(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    detail::Nifti1Header h;
    f.read(reinterpret_cast<char*>(&h), sizeof(h));
    if (!f) throw FormatError("nifti: file shorter than 348-byte header: " + path);
    if (h.sizeof_hdr != 348) {
        if (h.sizeof_hdr == 1543569408) // 348 byte-swapped
            throw FormatError("nifti: big-endian files are not supported: " + path);
        throw FormatError("nifti: bad sizeof_hdr " + std::to_string(h.sizeof_hdr));
    }
    const bool single_file = std::memcmp(h.magic, "n+1", 4) == 0;
    const bool pair_file = std::memcmp(h.magic, "ni1", 4) == 0;
    if (!single_file && !pair_file)
        throw FormatError("nifti: bad magic in " + path);

    const int ndim = h.dim[0];
    if (ndim < 3 || ndim > 5)
        throw FormatError("nifti: unsupported dim[0]=" + std::to_string(ndim));
    const int W = h.dim[1], H = h.dim[2], D = h.dim[3];
    const int Tdim = ndim >= 4 ? std::max<int>(1, h.dim[4]) : 1;
    const int C = ndim >= 5 ? std::max<int>(1, h.dim[5]) : 1;
    if (W < 1 || H < 1 || D < 1) throw FormatError("nifti: non-positive dims");
    if (Tdim != 1) throw FormatError("nifti: 4D time series are not supported");
    if (C != 1 && C != 3) throw FormatError("nifti: dim[5] must be 1 or 3");

    if (h.sform_code > 0 && !detail::sform_is_identity(h))
        std::cerr << "[cfreg] warning: non-identity affine in " << path << " is ignored\n";
    if ((h.scl_slope != 0.0f && h.scl_slope != 1.0f) || h.scl_inter != 0.0f)
        std::cerr << "[cfreg] warning: intensity scaling in " << path << " is ignored\n";

    std::ifstream* src = &f;
    std::ifstream img;
    size_t offset = static_cast<size_t>(h.vox_offset);
    if (pair_file) {
        std::string img_path = path;
        auto dot = img_path.rfind(".hdr");
        if (dot != std::string::npos) img_path.replace(dot, 4, ".img");
        else img_path += ".img";
        img.open(img_path, std::ios::binary);
        if (!img) throw IoError("cannot open image file: " + img_path);
        src = &img;
        offset = 0;
    }
    src->seekg(static_cast<std::streamoff>(offset));

    Tensor<T> out(C, D, H, W);
    switch (h.datatype) {
        case detail::kNiftiUint8:   detail::read_cast<uint8_t>(*src, out); break;
        case detail::kNiftiInt16:   detail::read_cast<int16_t>(*src, out); break;
        case detail::kNiftiFloat32: detail::read_cast<float>(*src, out); break;
        default:
            throw UnsupportedDtypeError("nifti: unsupported datatype code " +
                                        std::to_string(h.datatype));
    }
    return out;
}

} // namespace cfreg
