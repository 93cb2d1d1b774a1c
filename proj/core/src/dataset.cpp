#include "ctxcert/dataset.hpp"

#include "ctxcert/error.hpp"
#include "ctxcert/npy.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

namespace ctxcert {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr float kRangeSlack = 1e-6f;
}

const ImageSample *Dataset::find(const std::string &sample_id) const
{
    for (const auto &s : samples)
        if (s.sample_id == sample_id)
            return &s;
    return nullptr;
}

std::string default_sample_id(std::size_t index, std::size_t count)
{
    std::size_t width = 1;
    for (std::size_t n = count > 0 ? count - 1 : 0; n >= 10; n /= 10)
        ++width;
    std::string digits = std::to_string(index);
    if (digits.size() < width)
        digits.insert(0, width - digits.size(), '0');
    return "s" + digits;
}

void validate_dataset(Dataset &dataset)
{
    std::set<std::string> seen;
    for (auto &sample : dataset.samples) {
        if (!seen.insert(sample.sample_id).second)
            throw FormatError("duplicate sample id '" + sample.sample_id + "'");
        if (sample.label >= dataset.class_names.size())
            throw RangeError("sample '" + sample.sample_id + "' has label " + std::to_string(sample.label) +
                             " but only " + std::to_string(dataset.class_names.size()) + " class names");
        if (sample.image.rank() != 3)
            throw ShapeError("sample '" + sample.sample_id + "' is not H x W x C");
        for (float &v : sample.image.data()) {
            if (!(v >= -kRangeSlack && v <= 1.0f + kRangeSlack))
                throw RangeError("sample '" + sample.sample_id + "' has pixel value " + std::to_string(v) +
                                 " outside [0, 1]");
            v = std::clamp(v, 0.0f, 1.0f);
        }
    }
}

Dataset load_dataset(const fs::path &manifest_path)
{
    std::ifstream in(manifest_path);
    if (!in)
        throw IoError("cannot open " + manifest_path.string());
    json manifest;
    try {
        manifest = json::parse(in);
    } catch (const json::exception &e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }

    const fs::path base = manifest_path.parent_path();
    Dataset dataset;
    try {
        const Tensor images = read_npy(base / manifest.at("images").get<std::string>());
        Shape label_shape;
        const auto labels = read_npy_int(base / manifest.at("labels").get<std::string>(), &label_shape);
        dataset.class_names = manifest.at("class_names").get<std::vector<std::string>>();

        if (images.rank() != 4)
            throw ShapeError(manifest_path.string() + ": images must be N x H x W x C, got " +
                             shape_to_string(images.shape()));
        if (label_shape.size() != 1 || labels.size() != images.dim(0))
            throw ShapeError(manifest_path.string() + ": " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(images.dim(0)) + " images");

        std::vector<std::string> ids;
        if (manifest.contains("sample_ids")) {
            ids = manifest["sample_ids"].get<std::vector<std::string>>();
            if (ids.size() != labels.size())
                throw ShapeError(manifest_path.string() + ": sample_ids length does not match images");
        }

        const std::size_t n = images.dim(0);
        dataset.samples.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] < 0)
                throw RangeError(manifest_path.string() + ": negative label at index " + std::to_string(i));
            dataset.samples.push_back(ImageSample{images.slice(i), static_cast<std::size_t>(labels[i]),
                                                  ids.empty() ? default_sample_id(i, n) : ids[i]});
        }
    } catch (const json::exception &e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
    validate_dataset(dataset);
    return dataset;
}

fs::path save_dataset(const Dataset &dataset, const fs::path &dir, const std::string &stem)
{
    if (dataset.samples.empty())
        throw ShapeError("cannot save an empty dataset");
    fs::create_directories(dir);

    const Shape &image_shape = dataset.samples.front().image.shape();
    Shape stacked{dataset.samples.size()};
    stacked.insert(stacked.end(), image_shape.begin(), image_shape.end());
    std::vector<float> pixels;
    std::vector<std::int64_t> labels;
    std::vector<std::string> ids;
    for (const auto &s : dataset.samples) {
        if (s.image.shape() != image_shape)
            throw ShapeError("dataset images must share one shape");
        pixels.insert(pixels.end(), s.image.values().begin(), s.image.values().end());
        labels.push_back(static_cast<std::int64_t>(s.label));
        ids.push_back(s.sample_id);
    }
    write_npy(Tensor(stacked, std::move(pixels)), dir / (stem + "_images.npy"));
    write_npy_int(labels, dir / (stem + "_labels.npy"));

    json manifest;
    manifest["images"] = stem + "_images.npy";
    manifest["labels"] = stem + "_labels.npy";
    manifest["class_names"] = dataset.class_names;
    manifest["sample_ids"] = ids;

    const fs::path path = dir / (stem + ".json");
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << manifest.dump(2) << '\n';
    return path;
}

} // namespace ctxcert
