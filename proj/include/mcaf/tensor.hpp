#ifndef MCAF_TENSOR_HPP
#define MCAF_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcaf {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

struct RangeError : std::runtime_error {
    explicit RangeError(const std::string& msg) : std::runtime_error("range error: " + msg) {}
};

// Dimensions of a rank-4 tensor in (batch, channel, height, width) order.
struct Shape {
    int64_t b = 0, c = 0, h = 0, w = 0;

    int64_t numel() const { return b * c * h * w; }
    bool operator==(const Shape& o) const { return b == o.b && c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        return "(" + std::to_string(b) + ", " + std::to_string(c) + ", " +
               std::to_string(h) + ", " + std::to_string(w) + ")";
    }
};

// Dense rank-4 tensor, contiguous row-major (b, c, h, w).
template <typename T>
struct TensorT {
    Shape shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(Shape s) : shape(s), data(static_cast<size_t>(s.numel()), T(0)) {
        if (s.b < 0 || s.c < 0 || s.h < 0 || s.w < 0)
            throw ShapeError("negative dimension " + s.str());
    }

    static TensorT full(Shape s, T v) {
        TensorT t(s);
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    bool empty() const { return data.empty(); }
    int64_t numel() const { return shape.numel(); }

    int64_t index(int64_t b, int64_t c, int64_t y, int64_t x) const {
        return ((b * shape.c + c) * shape.h + y) * shape.w + x;
    }
    T& at(int64_t b, int64_t c, int64_t y, int64_t x) { return data[static_cast<size_t>(index(b, c, y, x))]; }
    const T& at(int64_t b, int64_t c, int64_t y, int64_t x) const { return data[static_cast<size_t>(index(b, c, y, x))]; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

template <typename T>
inline void require_shape(const TensorT<T>& t, const Shape& s, const char* what) {
    if (t.shape != s)
        throw ShapeError(std::string(what) + ": expected " + s.str() + ", got " + t.shape.str());
}

} // namespace mcaf

#endif
