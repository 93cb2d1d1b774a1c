#include "ctxcert/ppm.hpp"

#include "ctxcert/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

namespace ctxcert {

std::uint8_t quantize(float value)
{
    const float clamped = std::clamp(value, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(255.0f * clamped));
}

void write_ppm(const Tensor &image, const std::filesystem::path &path)
{
    if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3))
        throw ShapeError("write_ppm: expected H x W x 1 or H x W x 3, got " + shape_to_string(image.shape()));
    const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);

    std::vector<char> bytes;
    bytes.reserve(h * w * 3);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t k = 0; k < 3; ++k)
                bytes.push_back(static_cast<char>(quantize(image.at(y, x, c == 3 ? k : 0))));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << "P6\n" << w << ' ' << h << "\n255\n";
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("write failed for " + path.string());
}

Tensor read_ppm(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (!in || magic != "P6" || maxval != 255)
        throw FormatError(path.string() + ": not a P6 PPM with maxval 255");
    in.get(); // single whitespace before the raster

    std::vector<unsigned char> bytes(w * h * 3);
    in.read(reinterpret_cast<char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in)
        throw FormatError(path.string() + ": truncated raster");

    Tensor image(Shape{h, w, 3});
    for (std::size_t i = 0; i < bytes.size(); ++i)
        image[i] = static_cast<float>(bytes[i]) / 255.0f;
    return image;
}

} // namespace ctxcert
