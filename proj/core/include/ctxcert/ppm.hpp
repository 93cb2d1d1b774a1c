#pragma once

#include "ctxcert/tensor.hpp"

#include <cstdint>
#include <filesystem>

namespace ctxcert {

// Binary PPM (P6, maxval 255). Values are quantized as round(255 * v); single-channel images are
// written as grey RGB.
std::uint8_t quantize(float value);
void write_ppm(const Tensor &image, const std::filesystem::path &path);
// Returns an H x W x 3 tensor with values byte / 255.
Tensor read_ppm(const std::filesystem::path &path);

} // namespace ctxcert
