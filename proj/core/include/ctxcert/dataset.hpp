#pragma once

#include "ctxcert/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ctxcert {

struct ImageSample {
    Tensor image; // H x W x C, values in [0, 1]
    std::size_t label = 0;
    std::string sample_id;
};

struct Dataset {
    std::vector<ImageSample> samples;
    std::vector<std::string> class_names;

    std::size_t size() const { return samples.size(); }
    std::size_t num_classes() const { return class_names.size(); }
    const ImageSample *find(const std::string &sample_id) const;
};

// Checks unique ids, labels within class_names and pixel range. Values within 1e-6 outside
// [0, 1] are clamped; anything further out is a RangeError.
void validate_dataset(Dataset &dataset);

// Manifest: {"images": "<N x H x W x C .npy>", "labels": "<N .npy>", "class_names": [...],
//            "sample_ids": [...] (optional)}.
Dataset load_dataset(const std::filesystem::path &manifest_path);
std::filesystem::path save_dataset(const Dataset &dataset, const std::filesystem::path &dir,
                                   const std::string &stem = "dataset");

// Default id for the sample at `index` in a dataset of `count` samples: zero-padded so ids sort
// in dataset order.
std::string default_sample_id(std::size_t index, std::size_t count);

} // namespace ctxcert
