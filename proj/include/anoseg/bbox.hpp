#pragma once

#include <algorithm>
#include <cstdint>

namespace anoseg {

/// Axis-aligned box in inclusive pixel coordinates.
struct BBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    bool valid() const { return x0 <= x1 && y0 <= y1; }
    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
    std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
    bool inside(int image_width, int image_height) const {
        return valid() && x0 >= 0 && y0 >= 0 && x1 < image_width && y1 < image_height;
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

} // namespace anoseg
