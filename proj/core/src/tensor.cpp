#include "ctxcert/tensor.hpp"

#include "ctxcert/error.hpp"

#include <functional>
#include <numeric>

namespace ctxcert {

std::size_t shape_size(const Shape &shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape &shape)
{
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0)
            out += ", ";
        out += std::to_string(shape[i]);
    }
    if (shape.size() == 1)
        out += ",";
    return out + ")";
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape))
    , data_(shape_size(shape_), fill)
{
}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape))
    , data_(std::move(data))
{
    if (shape_size(shape_) != data_.size())
        throw ShapeError("tensor shape " + shape_to_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " elements");
}

Tensor Tensor::reshaped(Shape shape) const
{
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice(std::size_t index) const
{
    if (shape_.empty() || index >= shape_[0])
        throw ShapeError("slice index out of range");
    Shape inner(shape_.begin() + 1, shape_.end());
    const std::size_t stride = shape_size(inner);
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(index * stride);
    return Tensor(std::move(inner), std::vector<float>(first, first + static_cast<std::ptrdiff_t>(stride)));
}

} // namespace ctxcert
