#pragma once

#include "ctxcert/dataset.hpp"
#include "ctxcert/model.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ctxcert::toy {

// Bundled synthetic stand-in for a small image-classification study: five classes of 8x8 RGB
// patterns, a nearest-prototype dense ReLU model and a small CNN. Everything is derived from the seed.

struct ToySuite {
    std::vector<Model> models;
    Dataset dataset;
};

ToySuite make_toy_suite(std::uint64_t seed = 7, std::size_t samples_per_class = 4);

struct ToySuitePaths {
    std::vector<std::filesystem::path> models;
    std::filesystem::path dataset;
};

ToySuitePaths write_toy_suite(const ToySuite &suite, const std::filesystem::path &dir);

} // namespace ctxcert::toy
