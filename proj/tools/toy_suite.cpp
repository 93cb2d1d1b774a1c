#include "toy_suite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

namespace ctxcert::toy {

namespace {

constexpr std::size_t kSide = 8;
constexpr std::size_t kChannels = 3;
constexpr std::size_t kClasses = 5;
constexpr std::size_t kTrainPerClass = 6;
const std::vector<std::string> kClassNames = {"red_disc", "white_field", "blue_stripes", "green_diagonal",
                                              "yellow_frame"};

Tensor prototype(std::size_t cls)
{
    Tensor img({kSide, kSide, kChannels});
    for (std::size_t y = 0; y < kSide; ++y) {
        for (std::size_t x = 0; x < kSide; ++x) {
            std::array<float, 3> rgb{0.15f, 0.15f, 0.15f};
            const double dy = static_cast<double>(y) - 3.5, dx = static_cast<double>(x) - 3.5;
            switch (cls) {
            case 0:
                if (dy * dy + dx * dx < 7.0)
                    rgb = {0.9f, 0.1f, 0.1f};
                break;
            case 1:
                rgb = {0.85f, 0.85f, 0.8f};
                break;
            case 2:
                rgb = x % 2 == 0 ? std::array<float, 3>{0.1f, 0.2f, 0.9f} : std::array<float, 3>{0.05f, 0.05f, 0.2f};
                break;
            case 3:
                if (x == y || x + 1 == y || x == y + 1)
                    rgb = {0.1f, 0.8f, 0.2f};
                break;
            default:
                if (x == 0 || y == 0 || x == kSide - 1 || y == kSide - 1)
                    rgb = {0.9f, 0.85f, 0.1f};
                break;
            }
            for (std::size_t c = 0; c < kChannels; ++c)
                img.at(y, x, c) = rgb[c];
        }
    }
    return img;
}

Tensor noisy(const Tensor &base, std::mt19937_64 &rng)
{
    std::uniform_real_distribution<float> noise(-0.12f, 0.12f);
    Tensor out = base;
    for (float &v : out.data())
        v = std::clamp(v + noise(rng), 0.0f, 1.0f);
    return out;
}

// Template matching on centred pixels: logit_c = m_c . (x - 0.5) - |m_c|^2 / 2, with m_c the centred
// class mean. Each affine score is split into relu(s) and relu(-s) and recombined by the last layer.
Model dense_model(const std::vector<std::vector<Tensor>> &train)
{
    const std::size_t n = kSide * kSide * kChannels;
    Tensor w1({2 * kClasses, n});
    Tensor b1({2 * kClasses});
    for (std::size_t c = 0; c < kClasses; ++c) {
        std::vector<double> mean(n, 0.0);
        for (const Tensor &img : train[c])
            for (std::size_t i = 0; i < n; ++i)
                mean[i] += (img[i] - 0.5) / static_cast<double>(train[c].size());
        double sq = 0.0, sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sq += mean[i] * mean[i];
            sum += mean[i];
        }
        const double bias = -0.5 * sum - 0.5 * sq;
        for (std::size_t i = 0; i < n; ++i) {
            w1[c * n + i] = static_cast<float>(mean[i]);
            w1[(kClasses + c) * n + i] = static_cast<float>(-mean[i]);
        }
        b1[c] = static_cast<float>(bias);
        b1[kClasses + c] = static_cast<float>(-bias);
    }
    Tensor w2({kClasses, 2 * kClasses}, 0.0f);
    for (std::size_t c = 0; c < kClasses; ++c) {
        w2[c * 2 * kClasses + c] = 1.0f;
        w2[c * 2 * kClasses + kClasses + c] = -1.0f;
    }
    std::vector<Layer> layers;
    layers.push_back(Layer::flatten());
    layers.push_back(Layer::dense(std::move(w1), std::move(b1)));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(std::move(w2), Tensor({kClasses}, 0.0f)));
    return Model("toy_dense", {kSide, kSide, kChannels}, std::move(layers));
}

// Random 3x3 stride-2 convolution features followed by a nearest-class-mean readout.
Model cnn_model(const std::vector<std::vector<Tensor>> &train, std::mt19937_64 &rng)
{
    constexpr std::size_t kFilters = 4;
    std::normal_distribution<double> normal(0.0, 0.4);
    Tensor conv_w({kFilters, kChannels, 3, 3});
    for (float &v : conv_w.data())
        v = static_cast<float>(normal(rng));
    Tensor conv_b({kFilters});
    for (float &v : conv_b.data())
        v = static_cast<float>(0.25 * normal(rng));

    std::vector<Layer> features;
    features.push_back(Layer::conv2d(conv_w, conv_b, 2, 1, 1));
    features.push_back(Layer::relu());
    features.push_back(Layer::flatten());
    const Model extractor("features", {kSide, kSide, kChannels}, features);
    const std::size_t width = kFilters * 4 * 4;

    Tensor w({kClasses, width});
    Tensor b({kClasses});
    for (std::size_t c = 0; c < kClasses; ++c) {
        std::vector<double> mean(width, 0.0);
        for (const Tensor &img : train[c]) {
            const auto f = forward(extractor, img);
            for (std::size_t i = 0; i < width; ++i)
                mean[i] += f[i] / static_cast<double>(train[c].size());
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
            w[c * width + i] = static_cast<float>(mean[i]);
            sq += mean[i] * mean[i];
        }
        b[c] = static_cast<float>(-0.5 * sq);
    }
    features.push_back(Layer::dense(std::move(w), std::move(b)));
    return Model("toy_cnn", {kSide, kSide, kChannels}, std::move(features));
}

} // namespace

ToySuite make_toy_suite(std::uint64_t seed, std::size_t samples_per_class)
{
    std::mt19937_64 rng(seed);
    std::vector<Tensor> prototypes;
    for (std::size_t c = 0; c < kClasses; ++c)
        prototypes.push_back(prototype(c));

    std::vector<std::vector<Tensor>> train(kClasses);
    for (std::size_t c = 0; c < kClasses; ++c)
        for (std::size_t i = 0; i < kTrainPerClass; ++i)
            train[c].push_back(noisy(prototypes[c], rng));

    ToySuite suite;
    suite.models.push_back(dense_model(train));
    suite.models.push_back(cnn_model(train, rng));

    suite.dataset.class_names = kClassNames;
    const std::size_t total = kClasses * samples_per_class;
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t cls = i % kClasses;
        suite.dataset.samples.push_back(ImageSample{noisy(prototypes[cls], rng), cls, default_sample_id(i, total)});
    }
    return suite;
}

ToySuitePaths write_toy_suite(const ToySuite &suite, const std::filesystem::path &dir)
{
    ToySuitePaths paths;
    for (const Model &model : suite.models)
        paths.models.push_back(save_model(model, dir, model.id()));
    paths.dataset = save_dataset(suite.dataset, dir, "dataset");
    return paths;
}

} // namespace ctxcert::toy
