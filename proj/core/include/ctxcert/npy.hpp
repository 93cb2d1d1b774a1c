#pragma once

#include "ctxcert/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ctxcert {

// NPY v1.0 reader/writer. Only little-endian "<f4", "<f8" and "<i8" payloads in C order
// are understood; "<f8" is narrowed to float32 on read.

struct NpyHeader {
    std::string descr;
    bool fortran_order = false;
    Shape shape;
};

// Parses the Python-literal header dictionary, e.g.
// "{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2), }".
NpyHeader parse_npy_header(const std::string &dict);

Tensor read_npy(const std::filesystem::path &path);
void write_npy(const Tensor &tensor, const std::filesystem::path &path);

// Integer arrays (class labels). Accepts "<i8" and "<i4".
std::vector<std::int64_t> read_npy_int(const std::filesystem::path &path, Shape *shape = nullptr);
void write_npy_int(const std::vector<std::int64_t> &values, const std::filesystem::path &path);

} // namespace ctxcert
