#pragma once

#include "anoseg/image.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace anoseg::nn {

/// (batch, channels, height, width); feature vectors use height = width = 1.
struct Shape {
    int n = 0;
    int c = 0;
    int h = 1;
    int w = 1;

    std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
    std::size_t sample_size() const { return static_cast<std::size_t>(c) * h * w; }
    std::size_t plane_size() const { return static_cast<std::size_t>(h) * w; }
    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
    double at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

    std::span<double> sample(int n) { return {data_.data() + n * shape_.sample_size(), shape_.sample_size()}; }
    std::span<const double> sample(int n) const {
        return {data_.data() + n * shape_.sample_size(), shape_.sample_size()};
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    /// Same data, new shape of equal size.
    Tensor reshaped(Shape shape) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t index(int n, int c, int y, int x) const {
        return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }

    Shape shape_;
    std::vector<double> data_;
};

/// Stacks equally-shaped images into a (n, c, h, w) batch.
Tensor to_batch(std::span<const Image> images);
Tensor to_batch(std::span<const Image* const> images);

/// Extracts sample @p n of a 4-D tensor as an Image (values copied as-is).
Image to_image(const Tensor& batch, int n);

} // namespace anoseg::nn
