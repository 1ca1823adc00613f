#include "anoseg/nn/tensor.hpp"

#include "anoseg/error.hpp"

#include <algorithm>

namespace anoseg::nn {

std::string Shape::str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) throw ShapeError("negative tensor dimension");
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) throw ShapeError("tensor data length does not match shape " + shape_.str());
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape.size() != shape_.size()) throw ShapeError("cannot reshape " + shape_.str() + " to " + shape.str());
    return Tensor(shape, data_);
}

Tensor to_batch(std::span<const Image* const> images) {
    if (images.empty()) throw ShapeError("cannot batch zero images");
    const Image& first = *images.front();
    Tensor out(Shape{static_cast<int>(images.size()), first.channels(), first.height(), first.width()});
    for (std::size_t i = 0; i < images.size(); ++i) {
        if (!images[i]->same_shape(first)) throw ShapeError("batch images differ in shape");
        std::ranges::copy(images[i]->data(), out.sample(static_cast<int>(i)).begin());
    }
    return out;
}

Tensor to_batch(std::span<const Image> images) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(images.size());
    for (const auto& img : images) ptrs.push_back(&img);
    return to_batch(std::span<const Image* const>(ptrs));
}

Image to_image(const Tensor& batch, int n) {
    const Shape& s = batch.shape();
    if (n < 0 || n >= s.n) throw ShapeError("sample index out of range");
    const auto values = batch.sample(n);
    return Image(s.h, s.w, s.c, std::vector<double>(values.begin(), values.end()));
}

} // namespace anoseg::nn
