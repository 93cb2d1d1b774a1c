#pragma once

#include "ctxcert/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxcert {

// Only piecewise-linear layers are accepted, so every model can be handed to the verifier.
enum class LayerKind { dense, conv2d, relu, flatten };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view name);

struct Layer {
    LayerKind kind = LayerKind::relu;
    // dense: out x in. conv2d: out_channels x in_channels x kh x kw.
    Tensor weights;
    // dense: out. conv2d: out_channels.
    Tensor bias;
    std::size_t stride = 1;
    std::size_t pad_h = 0;
    std::size_t pad_w = 0;

    // Filled in by Model during the shape check.
    Shape in_shape;
    Shape out_shape;

    bool is_affine() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

    static Layer dense(Tensor weights, Tensor bias);
    static Layer conv2d(Tensor weights, Tensor bias, std::size_t stride, std::size_t pad_h, std::size_t pad_w);
    static Layer relu();
    static Layer flatten();
};

// Calls fn(out_index, in_index, weight) for every connection of an affine layer.
// Indices address the flattened (row-major, HWC for images) input and output activations.
template <class Fn>
void visit_connections(const Layer &layer, Fn &&fn)
{
    const float *w = layer.weights.data().data();
    if (layer.kind == LayerKind::dense) {
        const std::size_t rows = layer.weights.dim(0);
        const std::size_t cols = layer.weights.dim(1);
        for (std::size_t o = 0; o < rows; ++o)
            for (std::size_t i = 0; i < cols; ++i)
                fn(o, i, w[o * cols + i]);
        return;
    }
    const std::size_t in_h = layer.in_shape[0], in_w = layer.in_shape[1], in_c = layer.in_shape[2];
    const std::size_t out_h = layer.out_shape[0], out_w = layer.out_shape[1], out_c = layer.out_shape[2];
    const std::size_t kh = layer.weights.dim(2), kw = layer.weights.dim(3);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            for (std::size_t oc = 0; oc < out_c; ++oc) {
                const std::size_t out_index = (oy * out_w + ox) * out_c + oc;
                for (std::size_t ic = 0; ic < in_c; ++ic) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const auto iy = static_cast<std::ptrdiff_t>(oy * layer.stride + ky) -
                                        static_cast<std::ptrdiff_t>(layer.pad_h);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h))
                            continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const auto ix = static_cast<std::ptrdiff_t>(ox * layer.stride + kx) -
                                            static_cast<std::ptrdiff_t>(layer.pad_w);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w))
                                continue;
                            const std::size_t in_index =
                                (static_cast<std::size_t>(iy) * in_w + static_cast<std::size_t>(ix)) * in_c + ic;
                            fn(out_index, in_index, w[((oc * in_c + ic) * kh + ky) * kw + kx]);
                        }
                    }
                }
            }
        }
    }
}

// Bias of the output neuron at a flattened output index.
inline float bias_of(const Layer &layer, std::size_t out_index)
{
    if (layer.kind == LayerKind::dense)
        return layer.bias[out_index];
    return layer.bias[out_index % layer.out_shape[2]];
}

class Model {
public:
    Model() = default;
    // Shape-checks the whole chain; throws ShapeError on any inconsistency.
    Model(std::string id, Shape input_shape, std::vector<Layer> layers);

    const std::string &id() const { return id_; }
    const Shape &input_shape() const { return input_shape_; }
    const std::vector<Layer> &layers() const { return layers_; }
    std::size_t num_classes() const { return num_classes_; }

private:
    std::string id_;
    Shape input_shape_;
    std::vector<Layer> layers_;
    std::size_t num_classes_ = 0;
};

using Logits = std::vector<float>;

Logits forward(const Model &model, const Tensor &image);

// Output of every layer in order (flattened), for bound-containment checks.
std::vector<std::vector<float>> forward_trace(const Model &model, const Tensor &image);

// Argmax with ties broken toward the lowest index.
std::size_t argmax(std::span<const float> logits);
std::size_t classify(const Model &model, const Tensor &image);

// JSON manifest with external NPY payloads; paths resolve relative to the manifest.
Model load_model(const std::filesystem::path &manifest_path);
// Writes <dir>/<stem>.json plus one NPY per weight/bias tensor. Returns the manifest path.
std::filesystem::path save_model(const Model &model, const std::filesystem::path &dir,
                                 const std::string &stem = "model");

} // namespace ctxcert
