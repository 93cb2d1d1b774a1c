#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ctxcert {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape &shape);
std::string shape_to_string(const Shape &shape);

// Row-major float32 array. Images are laid out H x W x C.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    const Shape &shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    const std::vector<float> &values() const { return data_; }

    float &operator[](std::size_t i) { return data_[i]; }
    float operator[](std::size_t i) const { return data_[i]; }

    // Element (i, j, k) of a rank-3 tensor.
    float &at(std::size_t i, std::size_t j, std::size_t k)
    {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    float at(std::size_t i, std::size_t j, std::size_t k) const
    {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    Tensor reshaped(Shape shape) const;

    // Slice along the first axis: returns element `index` with the leading dimension dropped.
    Tensor slice(std::size_t index) const;

    friend bool operator==(const Tensor &, const Tensor &) = default;

private:
    Shape shape_;
    std::vector<float> data_;
};

} // namespace ctxcert
