#include "ctxcert/model.hpp"

#include "ctxcert/error.hpp"
#include "ctxcert/npy.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace ctxcert {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::dense:
        return "dense";
    case LayerKind::conv2d:
        return "conv2d";
    case LayerKind::relu:
        return "relu";
    case LayerKind::flatten:
        return "flatten";
    }
    return "?";
}

LayerKind layer_kind_from_string(std::string_view name)
{
    if (name == "dense")
        return LayerKind::dense;
    if (name == "conv2d")
        return LayerKind::conv2d;
    if (name == "relu")
        return LayerKind::relu;
    if (name == "flatten")
        return LayerKind::flatten;
    throw FormatError("unknown layer kind '" + std::string(name) + "'");
}

Layer Layer::dense(Tensor weights, Tensor bias)
{
    Layer layer;
    layer.kind = LayerKind::dense;
    layer.weights = std::move(weights);
    layer.bias = std::move(bias);
    return layer;
}

Layer Layer::conv2d(Tensor weights, Tensor bias, std::size_t stride, std::size_t pad_h, std::size_t pad_w)
{
    Layer layer;
    layer.kind = LayerKind::conv2d;
    layer.weights = std::move(weights);
    layer.bias = std::move(bias);
    layer.stride = stride;
    layer.pad_h = pad_h;
    layer.pad_w = pad_w;
    return layer;
}

Layer Layer::relu()
{
    return Layer{};
}

Layer Layer::flatten()
{
    Layer layer;
    layer.kind = LayerKind::flatten;
    return layer;
}

Model::Model(std::string id, Shape input_shape, std::vector<Layer> layers)
    : id_(std::move(id))
    , input_shape_(std::move(input_shape))
    , layers_(std::move(layers))
{
    if (input_shape_.size() != 3 || shape_size(input_shape_) == 0)
        throw ShapeError("model '" + id_ + "': input_shape must be a non-empty H x W x C");
    if (layers_.empty())
        throw ShapeError("model '" + id_ + "' has no layers");

    Shape current = input_shape_;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        Layer &layer = layers_[li];
        const std::string where = "model '" + id_ + "' layer " + std::to_string(li) + " (" +
                                  std::string(to_string(layer.kind)) + "): ";
        layer.in_shape = current;
        switch (layer.kind) {
        case LayerKind::dense: {
            if (layer.weights.rank() != 2)
                throw ShapeError(where + "weights must be rank 2, got " + shape_to_string(layer.weights.shape()));
            const std::size_t out = layer.weights.dim(0);
            if (layer.weights.dim(1) != shape_size(current))
                throw ShapeError(where + "weights " + shape_to_string(layer.weights.shape()) +
                                 " do not accept input of size " + std::to_string(shape_size(current)));
            if (layer.bias.shape() != Shape{out})
                throw ShapeError(where + "bias shape " + shape_to_string(layer.bias.shape()) + " != (" +
                                 std::to_string(out) + ",)");
            current = Shape{out};
            break;
        }
        case LayerKind::conv2d: {
            if (current.size() != 3)
                throw ShapeError(where + "input must be H x W x C, got " + shape_to_string(current));
            if (layer.weights.rank() != 4)
                throw ShapeError(where + "weights must be rank 4, got " + shape_to_string(layer.weights.shape()));
            if (layer.stride == 0)
                throw ShapeError(where + "stride must be positive");
            const std::size_t out_c = layer.weights.dim(0);
            const std::size_t kh = layer.weights.dim(2), kw = layer.weights.dim(3);
            if (layer.weights.dim(1) != current[2])
                throw ShapeError(where + "weights expect " + std::to_string(layer.weights.dim(1)) +
                                 " input channels, got " + std::to_string(current[2]));
            if (layer.bias.shape() != Shape{out_c})
                throw ShapeError(where + "bias shape " + shape_to_string(layer.bias.shape()) + " != (" +
                                 std::to_string(out_c) + ",)");
            const std::size_t span_h = current[0] + 2 * layer.pad_h;
            const std::size_t span_w = current[1] + 2 * layer.pad_w;
            if (kh == 0 || kw == 0 || span_h < kh || span_w < kw)
                throw ShapeError(where + "kernel does not fit the padded input");
            current = Shape{(span_h - kh) / layer.stride + 1, (span_w - kw) / layer.stride + 1, out_c};
            break;
        }
        case LayerKind::relu:
            break;
        case LayerKind::flatten:
            current = Shape{shape_size(current)};
            break;
        }
        layer.out_shape = current;
    }
    if (current.size() != 1)
        throw ShapeError("model '" + id_ + "': final layer output must be a vector, got " + shape_to_string(current));
    num_classes_ = current[0];
}

namespace {

void apply_affine(const Layer &layer, const std::vector<float> &in, std::vector<float> &out)
{
    const std::size_t out_size = shape_size(layer.out_shape);
    std::vector<double> acc(out_size);
    for (std::size_t o = 0; o < out_size; ++o)
        acc[o] = bias_of(layer, o);
    visit_connections(layer, [&](std::size_t o, std::size_t i, float w) {
        acc[o] += static_cast<double>(w) * static_cast<double>(in[i]);
    });
    out.resize(out_size);
    for (std::size_t o = 0; o < out_size; ++o)
        out[o] = static_cast<float>(acc[o]);
}

template <class OnLayer>
void run_layers(const Model &model, const Tensor &image, OnLayer &&on_layer)
{
    if (image.shape() != model.input_shape())
        throw ShapeError("image shape " + shape_to_string(image.shape()) + " does not match model '" + model.id() +
                         "' input " + shape_to_string(model.input_shape()));
    std::vector<float> current(image.values());
    std::vector<float> next;
    for (const Layer &layer : model.layers()) {
        switch (layer.kind) {
        case LayerKind::dense:
        case LayerKind::conv2d:
            apply_affine(layer, current, next);
            current.swap(next);
            break;
        case LayerKind::relu:
            for (float &v : current)
                v = std::max(v, 0.0f);
            break;
        case LayerKind::flatten:
            break;
        }
        on_layer(current);
    }
}

} // namespace

Logits forward(const Model &model, const Tensor &image)
{
    Logits logits;
    run_layers(model, image, [&](const std::vector<float> &out) { logits = out; });
    return logits;
}

std::vector<std::vector<float>> forward_trace(const Model &model, const Tensor &image)
{
    std::vector<std::vector<float>> trace;
    trace.reserve(model.layers().size());
    run_layers(model, image, [&](const std::vector<float> &out) { trace.push_back(out); });
    return trace;
}

std::size_t argmax(std::span<const float> logits)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best])
            best = i;
    return best;
}

std::size_t classify(const Model &model, const Tensor &image)
{
    return argmax(forward(model, image));
}

namespace {

json read_json(const fs::path &path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

Tensor load_payload(const fs::path &base, const json &entry, const char *key, const std::string &where)
{
    if (!entry.contains(key) || !entry[key].is_string())
        throw FormatError(where + "missing '" + key + "' file reference");
    const fs::path file = base / entry[key].get<std::string>();
    if (!fs::exists(file))
        throw IoError(where + "missing weight file " + file.string());
    return read_npy(file);
}

} // namespace

Model load_model(const fs::path &manifest_path)
{
    const json manifest = read_json(manifest_path);
    const fs::path base = manifest_path.parent_path();

    try {
        std::string id = manifest.value("id", manifest_path.stem().string());
        Shape input_shape = manifest.at("input_shape").get<Shape>();

        std::vector<Layer> layers;
        const auto &entries = manifest.at("layers");
        for (std::size_t li = 0; li < entries.size(); ++li) {
            const json &entry = entries[li];
            const std::string where = manifest_path.string() + " layer " + std::to_string(li) + ": ";
            const LayerKind kind = layer_kind_from_string(entry.at("kind").get<std::string>());
            switch (kind) {
            case LayerKind::dense: {
                Tensor weights = load_payload(base, entry, "weights", where);
                if (entry.contains("out") && entry.contains("in")) {
                    const Shape declared{entry["out"].get<std::size_t>(), entry["in"].get<std::size_t>()};
                    if (weights.shape() != declared)
                        throw ShapeError(where + "declared weights " + shape_to_string(declared) + " but file holds " +
                                         shape_to_string(weights.shape()));
                }
                layers.push_back(Layer::dense(std::move(weights), load_payload(base, entry, "bias", where)));
                break;
            }
            case LayerKind::conv2d: {
                Tensor weights = load_payload(base, entry, "weights", where);
                std::size_t pad_h = 0, pad_w = 0;
                if (entry.contains("padding")) {
                    const json &pad = entry["padding"];
                    if (pad.is_array()) {
                        pad_h = pad.at(0).get<std::size_t>();
                        pad_w = pad.at(1).get<std::size_t>();
                    } else {
                        pad_h = pad_w = pad.get<std::size_t>();
                    }
                }
                layers.push_back(Layer::conv2d(std::move(weights), load_payload(base, entry, "bias", where),
                                               entry.value("stride", std::size_t{1}), pad_h, pad_w));
                break;
            }
            case LayerKind::relu:
                layers.push_back(Layer::relu());
                break;
            case LayerKind::flatten:
                layers.push_back(Layer::flatten());
                break;
            }
        }

        Model model(std::move(id), std::move(input_shape), std::move(layers));
        if (manifest.contains("num_classes") && manifest["num_classes"].get<std::size_t>() != model.num_classes())
            throw ShapeError(manifest_path.string() + ": num_classes " +
                             std::to_string(manifest["num_classes"].get<std::size_t>()) +
                             " does not match final layer width " + std::to_string(model.num_classes()));
        return model;
    } catch (const json::exception &e) {
        throw FormatError(manifest_path.string() + ": " + e.what());
    }
}

fs::path save_model(const Model &model, const fs::path &dir, const std::string &stem)
{
    fs::create_directories(dir);
    json manifest;
    manifest["id"] = model.id();
    manifest["input_shape"] = model.input_shape();
    manifest["num_classes"] = model.num_classes();
    manifest["layers"] = json::array();

    for (std::size_t li = 0; li < model.layers().size(); ++li) {
        const Layer &layer = model.layers()[li];
        json entry;
        entry["kind"] = std::string(to_string(layer.kind));
        if (layer.is_affine()) {
            const std::string prefix = stem + "_l" + std::to_string(li);
            write_npy(layer.weights, dir / (prefix + "_w.npy"));
            write_npy(layer.bias, dir / (prefix + "_b.npy"));
            entry["weights"] = prefix + "_w.npy";
            entry["bias"] = prefix + "_b.npy";
            if (layer.kind == LayerKind::dense) {
                entry["out"] = layer.weights.dim(0);
                entry["in"] = layer.weights.dim(1);
            } else {
                entry["stride"] = layer.stride;
                entry["padding"] = json::array({layer.pad_h, layer.pad_w});
            }
        }
        manifest["layers"].push_back(std::move(entry));
    }

    const fs::path path = dir / (stem + ".json");
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << manifest.dump(2) << '\n';
    return path;
}

} // namespace ctxcert
