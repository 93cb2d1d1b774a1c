#include "ctxcert/error.hpp"
#include "ctxcert/model.hpp"
#include "ctxcert/npy.hpp"

#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

using namespace ctxcert;
using ctxcert::testing::TempDir;

namespace {

Model two_layer_model()
{
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(Tensor({3, 4}, 0.1f), Tensor({3}, 0.0f)));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(Tensor({2, 3}, 0.2f), Tensor({2}, 0.0f)));
    return Model("m", {1, 4, 1}, std::move(layers));
}

nlohmann::json read_json(const std::filesystem::path &path)
{
    std::ifstream in(path);
    return nlohmann::json::parse(in);
}

void write_json(const std::filesystem::path &path, const nlohmann::json &j)
{
    std::ofstream(path) << j.dump(2);
}

// Straight-line re-implementation of a dense ReLU stack, all in double.
std::vector<double> reference_forward(const Model &model, const Tensor &image)
{
    std::vector<double> x(image.data().begin(), image.data().end());
    for (const Layer &layer : model.layers()) {
        if (layer.kind == LayerKind::relu) {
            for (double &v : x)
                v = v > 0 ? v : 0;
        } else if (layer.kind == LayerKind::dense) {
            const std::size_t rows = layer.weights.dim(0), cols = layer.weights.dim(1);
            std::vector<double> y(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                double acc = layer.bias[r];
                for (std::size_t c = 0; c < cols; ++c)
                    acc += static_cast<double>(layer.weights[r * cols + c]) * x[c];
                y[r] = static_cast<float>(acc);
            }
            x = y;
        }
    }
    return x;
}

} // namespace

TEST(ModelLoad, ThreeLayerManifest)
{
    TempDir dir;
    const auto manifest = save_model(two_layer_model(), dir.path(), "m");
    const Model m = load_model(manifest);
    EXPECT_EQ(m.layers().size(), 3u);
    EXPECT_EQ(m.num_classes(), 2u);
    EXPECT_EQ(m.id(), "m");
}

TEST(ModelLoad, DeclaredShapeMismatch)
{
    TempDir dir;
    const auto manifest = save_model(two_layer_model(), dir.path(), "m");
    auto j = read_json(manifest);
    // The manifest still declares 3 x 4 for the first layer.
    write_npy(Tensor({3, 3}, 0.0f), dir.path() / j["layers"][0]["weights"].get<std::string>());
    write_json(manifest, j);
    EXPECT_THROW(load_model(manifest), ShapeError);
}

TEST(ModelLoad, UnknownLayerKind)
{
    TempDir dir;
    const auto manifest = save_model(two_layer_model(), dir.path(), "m");
    auto j = read_json(manifest);
    j["layers"][1]["kind"] = "sigmoid";
    write_json(manifest, j);
    EXPECT_THROW(load_model(manifest), FormatError);
}

TEST(ModelLoad, MissingWeightFile)
{
    TempDir dir;
    const auto manifest = save_model(two_layer_model(), dir.path(), "m");
    auto j = read_json(manifest);
    std::filesystem::remove(dir.path() / j["layers"][2]["weights"].get<std::string>());
    EXPECT_THROW(load_model(manifest), IoError);
}

TEST(ModelLoad, ConvRoundTrip)
{
    TempDir dir;
    std::mt19937_64 rng(5);
    const Model m = ctxcert::testing::random_conv_network(rng, 5, 4, 3, 3);
    const Model back = load_model(save_model(m, dir.path(), "conv"));
    const Tensor img = ctxcert::testing::random_image(rng, {5, 4, 3});
    EXPECT_EQ(forward(back, img), forward(m, img));
}

TEST(ModelShape, RejectsWrongChain)
{
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(Tensor({3, 5}, 0.0f), Tensor({3}, 0.0f)));
    EXPECT_THROW(Model("bad", {1, 4, 1}, layers), ShapeError);
    const Model ok = two_layer_model();
    EXPECT_THROW(forward(ok, Tensor({1, 5, 1}, 0.0f)), ShapeError);
}

TEST(Forward, Identity)
{
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, 0.0f)));
    const Model m("id", {1, 2, 1}, std::move(layers));
    EXPECT_EQ(forward(m, Tensor({1, 2, 1}, {0.2f, 0.8f})), (Logits{0.2f, 0.8f}));
}

TEST(Forward, DirectArithmetic)
{
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(Tensor({1, 2}, {1, -1}), Tensor({1}, {0.5f})));
    const Model m("d", {1, 2, 1}, std::move(layers));
    EXPECT_NEAR(forward(m, Tensor({1, 2, 1}, {0.3f, 0.1f}))[0], 0.7f, 1e-7);
}

TEST(Forward, MatchesStraightLineOracle)
{
    std::mt19937_64 rng(21);
    const Model m = ctxcert::testing::random_dense_network(rng, 6, {8}, 3);
    for (int i = 0; i < 5; ++i) {
        const Tensor x = ctxcert::testing::random_image(rng, {1, 6, 1});
        const Logits got = forward(m, x);
        const auto want = reference_forward(m, x);
        for (std::size_t k = 0; k < got.size(); ++k)
            EXPECT_NEAR(got[k], want[k], 1e-6);
    }
}

TEST(Forward, ConvAgainstHandComputation)
{
    // 3x3 single channel, one 2x2 kernel of ones, stride 1, no padding: 2x2 window sums.
    std::vector<Layer> layers;
    layers.push_back(Layer::conv2d(Tensor({1, 1, 2, 2}, 1.0f), Tensor({1}, {0.5f}), 1, 0, 0));
    layers.push_back(Layer::flatten());
    const Model m("c", {3, 3, 1}, std::move(layers));
    const Tensor x({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    EXPECT_EQ(forward(m, x), (Logits{12.5f, 16.5f, 24.5f, 28.5f}));
}

TEST(Classify, ArgmaxAndTies)
{
    EXPECT_EQ(argmax(std::vector<float>{0.1f, 0.9f, 0.3f}), 1u);
    EXPECT_EQ(argmax(std::vector<float>{0.5f, 0.5f}), 0u);
    EXPECT_EQ(argmax(std::vector<float>{2.0f, 2.0f, 2.0f, 2.0f}), 0u);
}

TEST(ModelProperty, PiecewiseLinearInsideActivationRegion)
{
    std::mt19937_64 rng(99);
    std::size_t checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Model m = ctxcert::testing::random_dense_network(rng, 6, {8, 8}, 3);
        const Tensor a = ctxcert::testing::random_image(rng, {1, 6, 1});
        Tensor b = a;
        std::normal_distribution<float> nudge(0.0f, 0.01f);
        for (float &v : b.data())
            v += nudge(rng);
        Tensor mid = a;
        for (std::size_t i = 0; i < mid.size(); ++i)
            mid[i] = 0.5f * (a[i] + b[i]);
        const auto ta = forward_trace(m, a), tb = forward_trace(m, b);
        bool same_pattern = true;
        for (std::size_t l = 0; l < ta.size(); ++l)
            if (m.layers()[l].kind == LayerKind::relu)
                for (std::size_t k = 0; k < ta[l].size(); ++k)
                    same_pattern = same_pattern && ((ta[l][k] > 0) == (tb[l][k] > 0));
        if (!same_pattern)
            continue;
        ++checked;
        const auto fa = forward(m, a), fb = forward(m, b), fm = forward(m, mid);
        for (std::size_t k = 0; k < fm.size(); ++k)
            EXPECT_NEAR(fm[k], 0.5 * (fa[k] + fb[k]), 1e-5);
    }
    EXPECT_GT(checked, 100u);
}

TEST(ModelProperty, ClassifyInvariantUnderUniformBiasShift)
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<float> shift(-3.0f, 3.0f);
    for (int trial = 0; trial < 100; ++trial) {
        const Model m = ctxcert::testing::random_dense_network(rng, 6, {8}, 4);
        const Tensor x = ctxcert::testing::random_image(rng, {1, 6, 1});
        std::vector<Layer> layers = m.layers();
        // A power of two shift keeps float rounding order-preserving.
        const float c = std::ldexp(1.0f, static_cast<int>(shift(rng)));
        for (float &b : layers.back().bias.data())
            b += c;
        const Model shifted("s", m.input_shape(), layers);
        const auto base = forward(m, x);
        const auto moved = forward(shifted, x);
        // Exact comparison on logits that are not within rounding of a tie.
        std::vector<float> sorted = base;
        std::sort(sorted.begin(), sorted.end());
        if (sorted[sorted.size() - 1] - sorted[sorted.size() - 2] < 1e-4f)
            continue;
        EXPECT_EQ(argmax(moved), argmax(base));
    }
}
