#ifndef MCAF_OPS_HPP
#define MCAF_OPS_HPP

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcaf/tensor.hpp"

// Forward/backward kernels for every operation the model graph needs.
// All kernels are pure: inputs are const, the result is returned by value.
// Accumulations run in double so the float instantiation stays close to the
// double one used by the gradient checker.

namespace mcaf {

// ---------------------------------------------------------------------------
// conv2d

inline Shape conv2d_out_shape(const Shape& x, const Shape& k, int stride, int pad, int groups) {
    if (k.h != k.w) throw ShapeError("conv2d: non-square kernel " + k.str());
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (pad < 0) throw ShapeError("conv2d: negative padding");
    if (groups < 1 || x.c % groups != 0 || k.b % groups != 0)
        throw ShapeError("conv2d: channels not divisible by groups");
    if (k.c != x.c / groups)
        throw ShapeError("conv2d: kernel expects " + std::to_string(k.c) + " input channels per group, input has " +
                         std::to_string(x.c / groups));
    int64_t oh = (x.h + 2 * pad - k.h) / stride + 1;
    int64_t ow = (x.w + 2 * pad - k.w) / stride + 1;
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: empty output for input " + x.str());
    return Shape{x.b, k.b, oh, ow};
}

template <typename T>
TensorT<T> conv2d_fwd(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias,
                      int stride, int pad, int groups) {
    Shape os = conv2d_out_shape(x.shape, w.shape, stride, pad, groups);
    if (bias && bias->numel() != os.c) throw ShapeError("conv2d: bias size mismatch");
    TensorT<T> y(os);
    const int64_t cig = x.shape.c / groups, cog = os.c / groups, k = w.shape.h;
    for (int64_t b = 0; b < x.shape.b; ++b)
        for (int64_t g = 0; g < groups; ++g)
            for (int64_t ocl = 0; ocl < cog; ++ocl) {
                const int64_t oc = g * cog + ocl;
                const double bv = bias ? static_cast<double>(bias->data[static_cast<size_t>(oc)]) : 0.0;
                for (int64_t oy = 0; oy < os.h; ++oy)
                    for (int64_t ox = 0; ox < os.w; ++ox) {
                        double acc = bv;
                        for (int64_t icl = 0; icl < cig; ++icl) {
                            const int64_t ic = g * cig + icl;
                            for (int64_t ky = 0; ky < k; ++ky) {
                                const int64_t iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= x.shape.h) continue;
                                for (int64_t kx = 0; kx < k; ++kx) {
                                    const int64_t ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= x.shape.w) continue;
                                    acc += static_cast<double>(x.at(b, ic, iy, ix)) *
                                           static_cast<double>(w.at(oc, icl, ky, kx));
                                }
                            }
                        }
                        y.at(b, oc, oy, ox) = static_cast<T>(acc);
                    }
            }
    return y;
}

template <typename T>
TensorT<T> conv2d_fwd(const TensorT<T>& x, const TensorT<T>& w, std::nullptr_t,
                      int stride, int pad, int groups) {
    return conv2d_fwd(x, w, static_cast<const TensorT<T>*>(nullptr), stride, pad, groups);
}

template <typename T>
void conv2d_bwd(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& dy,
                int stride, int pad, int groups,
                TensorT<T>* dx, TensorT<T>* dw, TensorT<T>* db) {
    const Shape os = dy.shape;
    const int64_t cig = x.shape.c / groups, cog = os.c / groups, k = w.shape.h;
    for (int64_t b = 0; b < x.shape.b; ++b)
        for (int64_t g = 0; g < groups; ++g)
            for (int64_t ocl = 0; ocl < cog; ++ocl) {
                const int64_t oc = g * cog + ocl;
                for (int64_t oy = 0; oy < os.h; ++oy)
                    for (int64_t ox = 0; ox < os.w; ++ox) {
                        const T gy = dy.at(b, oc, oy, ox);
                        if (db) db->data[static_cast<size_t>(oc)] += gy;
                        for (int64_t icl = 0; icl < cig; ++icl) {
                            const int64_t ic = g * cig + icl;
                            for (int64_t ky = 0; ky < k; ++ky) {
                                const int64_t iy = oy * stride - pad + ky;
                                if (iy < 0 || iy >= x.shape.h) continue;
                                for (int64_t kx = 0; kx < k; ++kx) {
                                    const int64_t ix = ox * stride - pad + kx;
                                    if (ix < 0 || ix >= x.shape.w) continue;
                                    if (dx) dx->at(b, ic, iy, ix) += w.at(oc, icl, ky, kx) * gy;
                                    if (dw) dw->at(oc, icl, ky, kx) += x.at(b, ic, iy, ix) * gy;
                                }
                            }
                        }
                    }
            }
}

// ---------------------------------------------------------------------------
// bilinear resize, half-pixel centers

template <typename T>
TensorT<T> bilinear_fwd(const TensorT<T>& x, int64_t oh, int64_t ow) {
    if (oh < 1 || ow < 1) throw ShapeError("bilinear_resize: zero-size target");
    TensorT<T> y(Shape{x.shape.b, x.shape.c, oh, ow});
    const double sy = static_cast<double>(x.shape.h) / static_cast<double>(oh);
    const double sx = static_cast<double>(x.shape.w) / static_cast<double>(ow);
    for (int64_t b = 0; b < x.shape.b; ++b)
        for (int64_t c = 0; c < x.shape.c; ++c)
            for (int64_t j = 0; j < oh; ++j) {
                double fy = (static_cast<double>(j) + 0.5) * sy - 0.5;
                fy = std::clamp(fy, 0.0, static_cast<double>(x.shape.h - 1));
                const int64_t y0 = static_cast<int64_t>(fy);
                const int64_t y1 = std::min(y0 + 1, x.shape.h - 1);
                const double wy = fy - static_cast<double>(y0);
                for (int64_t i = 0; i < ow; ++i) {
                    double fx = (static_cast<double>(i) + 0.5) * sx - 0.5;
                    fx = std::clamp(fx, 0.0, static_cast<double>(x.shape.w - 1));
                    const int64_t x0 = static_cast<int64_t>(fx);
                    const int64_t x1 = std::min(x0 + 1, x.shape.w - 1);
                    const double wx = fx - static_cast<double>(x0);
                    const double v = (1 - wy) * ((1 - wx) * x.at(b, c, y0, x0) + wx * x.at(b, c, y0, x1)) +
                                     wy * ((1 - wx) * x.at(b, c, y1, x0) + wx * x.at(b, c, y1, x1));
                    y.at(b, c, j, i) = static_cast<T>(v);
                }
            }
    return y;
}

template <typename T>
void bilinear_bwd(const Shape& xs, const TensorT<T>& dy, TensorT<T>* dx) {
    const int64_t oh = dy.shape.h, ow = dy.shape.w;
    const double sy = static_cast<double>(xs.h) / static_cast<double>(oh);
    const double sx = static_cast<double>(xs.w) / static_cast<double>(ow);
    for (int64_t b = 0; b < xs.b; ++b)
        for (int64_t c = 0; c < xs.c; ++c)
            for (int64_t j = 0; j < oh; ++j) {
                double fy = (static_cast<double>(j) + 0.5) * sy - 0.5;
                fy = std::clamp(fy, 0.0, static_cast<double>(xs.h - 1));
                const int64_t y0 = static_cast<int64_t>(fy);
                const int64_t y1 = std::min(y0 + 1, xs.h - 1);
                const double wy = fy - static_cast<double>(y0);
                for (int64_t i = 0; i < ow; ++i) {
                    double fx = (static_cast<double>(i) + 0.5) * sx - 0.5;
                    fx = std::clamp(fx, 0.0, static_cast<double>(xs.w - 1));
                    const int64_t x0 = static_cast<int64_t>(fx);
                    const int64_t x1 = std::min(x0 + 1, xs.w - 1);
                    const double wx = fx - static_cast<double>(x0);
                    const T g = dy.at(b, c, j, i);
                    dx->at(b, c, y0, x0) += static_cast<T>((1 - wy) * (1 - wx)) * g;
                    dx->at(b, c, y0, x1) += static_cast<T>((1 - wy) * wx) * g;
                    dx->at(b, c, y1, x0) += static_cast<T>(wy * (1 - wx)) * g;
                    dx->at(b, c, y1, x1) += static_cast<T>(wy * wx) * g;
                }
            }
}

// ---------------------------------------------------------------------------
// pixel shuffle: (b, c, h, w) -> (b, c/r^2, h*r, w*r)
// out[b, c, y*r+dy, x*r+dx] = in[b, c*r^2 + dy*r + dx, y, x]

template <typename T>
TensorT<T> pixel_shuffle_fwd(const TensorT<T>& x, int r) {
    if (r < 1) throw ShapeError("pixel_shuffle: factor must be >= 1");
    if (x.shape.c % (static_cast<int64_t>(r) * r) != 0)
        throw ShapeError("pixel_shuffle: channels " + std::to_string(x.shape.c) +
                         " not divisible by r^2 = " + std::to_string(r * r));
    const int64_t oc = x.shape.c / (static_cast<int64_t>(r) * r);
    TensorT<T> y(Shape{x.shape.b, oc, x.shape.h * r, x.shape.w * r});
    for (int64_t b = 0; b < x.shape.b; ++b)
        for (int64_t c = 0; c < oc; ++c)
            for (int64_t dy = 0; dy < r; ++dy)
                for (int64_t dx = 0; dx < r; ++dx) {
                    const int64_t ic = c * r * r + dy * r + dx;
                    for (int64_t j = 0; j < x.shape.h; ++j)
                        for (int64_t i = 0; i < x.shape.w; ++i)
                            y.at(b, c, j * r + dy, i * r + dx) = x.at(b, ic, j, i);
                }
    return y;
}

// Exact inverse rearrangement.
template <typename T>
TensorT<T> pixel_unshuffle(const TensorT<T>& y, int r) {
    if (r < 1 || y.shape.h % r != 0 || y.shape.w % r != 0)
        throw ShapeError("pixel_unshuffle: spatial dims not divisible by r");
    TensorT<T> x(Shape{y.shape.b, y.shape.c * r * r, y.shape.h / r, y.shape.w / r});
    for (int64_t b = 0; b < y.shape.b; ++b)
        for (int64_t c = 0; c < y.shape.c; ++c)
            for (int64_t dy = 0; dy < r; ++dy)
                for (int64_t dx = 0; dx < r; ++dx) {
                    const int64_t ic = c * r * r + dy * r + dx;
                    for (int64_t j = 0; j < x.shape.h; ++j)
                        for (int64_t i = 0; i < x.shape.w; ++i)
                            x.at(b, ic, j, i) = y.at(b, c, j * r + dy, i * r + dx);
                }
    return x;
}

// ---------------------------------------------------------------------------
// layer norm over the channel axis, independently per spatial position

template <typename T>
TensorT<T> layer_norm_fwd(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta, double eps) {
    if (eps <= 0) throw ShapeError("layer_norm: eps must be positive");
    if (gamma.numel() != x.shape.c || beta.numel() != x.shape.c)
        throw ShapeError("layer_norm: affine parameter size mismatch");
    TensorT<T> y(x.shape);
    const int64_t C = x.shape.c;
    for (int64_t b = 0; b < x.shape.b; ++b)
        for (int64_t j = 0; j < x.shape.h; ++j)
            for (int64_t i = 0; i < x.shape.w; ++i) {
                double mu = 0;
                for (int64_t c = 0; c < C; ++c) mu += x.at(b, c, j, i);
                mu /= static_cast<double>(C);
                double var = 0;
                for (int64_t c = 0; c < C; ++c) {
                    const double d = x.at(b, c, j, i) - mu;
                    var += d * d;
                }
                var /= static_cast<double>(C);
                const double inv = 1.0 / std::sqrt(var + eps);
                for (int64_t c = 0; c < C; ++c) {
                    const double xhat = (x.at(b, c, j, i) - mu) * inv;
                    y.at(b, c, j, i) = static_cast<T>(xhat * gamma.data[static_cast<size_t>(c)] +
                                                      beta.data[static_cast<size_t>(c)]);
                }
            }
    return y;
}

template <typename T>
void layer_norm_bwd(const TensorT<T>& x, const TensorT<T>& gamma, double eps, const TensorT<T>& dy,
                    TensorT<T>* dx, TensorT<T>* dgamma, TensorT<T>* dbeta) {
    const int64_t C = x.shape.c;
    std::vector<double> xhat(static_cast<size_t>(C));
    for (int64_t b = 0; b < x.shape.b; ++b)
        for (int64_t j = 0; j < x.shape.h; ++j)
            for (int64_t i = 0; i < x.shape.w; ++i) {
                double mu = 0;
                for (int64_t c = 0; c < C; ++c) mu += x.at(b, c, j, i);
                mu /= static_cast<double>(C);
                double var = 0;
                for (int64_t c = 0; c < C; ++c) {
                    const double d = x.at(b, c, j, i) - mu;
                    var += d * d;
                }
                var /= static_cast<double>(C);
                const double inv = 1.0 / std::sqrt(var + eps);
                double s1 = 0, s2 = 0;
                for (int64_t c = 0; c < C; ++c) {
                    xhat[static_cast<size_t>(c)] = (x.at(b, c, j, i) - mu) * inv;
                    const double dxh = static_cast<double>(dy.at(b, c, j, i)) * gamma.data[static_cast<size_t>(c)];
                    s1 += dxh;
                    s2 += dxh * xhat[static_cast<size_t>(c)];
                }
                for (int64_t c = 0; c < C; ++c) {
                    const double dxh = static_cast<double>(dy.at(b, c, j, i)) * gamma.data[static_cast<size_t>(c)];
                    if (dx)
                        dx->at(b, c, j, i) += static_cast<T>(
                            inv * (dxh - s1 / static_cast<double>(C) -
                                   xhat[static_cast<size_t>(c)] * s2 / static_cast<double>(C)));
                    if (dgamma)
                        dgamma->data[static_cast<size_t>(c)] +=
                            static_cast<T>(static_cast<double>(dy.at(b, c, j, i)) * xhat[static_cast<size_t>(c)]);
                    if (dbeta) dbeta->data[static_cast<size_t>(c)] += dy.at(b, c, j, i);
                }
            }
}

// ---------------------------------------------------------------------------
// softmax along one axis with a fixed scale: y = softmax(scale * x)

namespace detail {

inline void axis_strides(const Shape& s, int axis, int64_t& n, int64_t& stride, int64_t& outer) {
    const int64_t dims[4] = {s.b, s.c, s.h, s.w};
    if (axis < 0 || axis > 3) throw ShapeError("softmax: invalid axis");
    n = dims[axis];
    stride = 1;
    for (int a = axis + 1; a < 4; ++a) stride *= dims[a];
    outer = 1;
    for (int a = 0; a < axis; ++a) outer *= dims[a];
}

} // namespace detail

template <typename T>
TensorT<T> softmax_fwd(const TensorT<T>& x, int axis, double scale) {
    TensorT<T> y(x.shape);
    int64_t n, stride, outer, inner;
    detail::axis_strides(x.shape, axis, n, stride, outer, inner);
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < stride; ++in) {
            const int64_t base = o * n * stride + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (int64_t k = 0; k < n; ++k)
                mx = std::max(mx, scale * static_cast<double>(x.data[static_cast<size_t>(base + k * stride)]));
            double denom = 0;
            for (int64_t k = 0; k < n; ++k)
                denom += std::exp(scale * static_cast<double>(x.data[static_cast<size_t>(base + k * stride)]) - mx);
            for (int64_t k = 0; k < n; ++k)
                y.data[static_cast<size_t>(base + k * stride)] = static_cast<T>(
                    std::exp(scale * static_cast<double>(x.data[static_cast<size_t>(base + k * stride)]) - mx) / denom);
        }
    return y;
}

template <typename T>
void softmax_bwd(const TensorT<T>& y, int axis, double scale, const TensorT<T>& dy, TensorT<T>* dx) {
    int64_t n, stride, outer, inner;
    detail::axis_strides(y.shape, axis, n, stride, outer, inner);
    for (int64_t o = 0; o < outer; ++o)
        for (int64_t in = 0; in < stride; ++in) {
            const int64_t base = o * n * stride + in;
            double dot = 0;
            for (int64_t k = 0; k < n; ++k) {
                const size_t idx = static_cast<size_t>(base + k * stride);
                dot += static_cast<double>(y.data[idx]) * static_cast<double>(dy.data[idx]);
            }
            for (int64_t k = 0; k < n; ++k) {
                const size_t idx = static_cast<size_t>(base + k * stride);
                dx->data[idx] += static_cast<T>(scale * static_cast<double>(y.data[idx]) *
                                                (static_cast<double>(dy.data[idx]) - dot));
            }
        }
}

// ---------------------------------------------------------------------------
// matrix products on (b, 1, m, k) tensors

template <typename T>
TensorT<T> matmul_fwd(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape.b != b.shape.b || a.shape.c != 1 || b.shape.c != 1 || a.shape.w != b.shape.h)
        throw ShapeError("matmul: incompatible " + a.shape.str() + " x " + b.shape.str());
    TensorT<T> y(Shape{a.shape.b, 1, a.shape.h, b.shape.w});
    for (int64_t n = 0; n < a.shape.b; ++n)
        for (int64_t i = 0; i < a.shape.h; ++i)
            for (int64_t j = 0; j < b.shape.w; ++j) {
                double acc = 0;
                for (int64_t k = 0; k < a.shape.w; ++k)
                    acc += static_cast<double>(a.at(n, 0, i, k)) * static_cast<double>(b.at(n, 0, k, j));
                y.at(n, 0, i, j) = static_cast<T>(acc);
            }
    return y;
}

// y = a * b^T with a: (b,1,m,k), b: (b,1,n,k)
template <typename T>
TensorT<T> matmul_bt_fwd(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape.b != b.shape.b || a.shape.c != 1 || b.shape.c != 1 || a.shape.w != b.shape.w)
        throw ShapeError("matmul_bt: incompatible " + a.shape.str() + " x " + b.shape.str());
    TensorT<T> y(Shape{a.shape.b, 1, a.shape.h, b.shape.h});
    for (int64_t n = 0; n < a.shape.b; ++n)
        for (int64_t i = 0; i < a.shape.h; ++i)
            for (int64_t j = 0; j < b.shape.h; ++j) {
                double acc = 0;
                for (int64_t k = 0; k < a.shape.w; ++k)
                    acc += static_cast<double>(a.at(n, 0, i, k)) * static_cast<double>(b.at(n, 0, j, k));
                y.at(n, 0, i, j) = static_cast<T>(acc);
            }
    return y;
}

// ---------------------------------------------------------------------------
// broadcasting elementwise multiply

inline bool broadcast_ok(const Shape& a, const Shape& b, Shape& out) {
    auto dim = [](int64_t x, int64_t y, int64_t& o) {
        if (x == y) { o = x; return true; }
        if (x == 1) { o = y; return true; }
        if (y == 1) { o = x; return true; }
        return false;
    };
    return dim(a.b, b.b, out.b) && dim(a.c, b.c, out.c) && dim(a.h, b.h, out.h) && dim(a.w, b.w, out.w);
}

template <typename T>
TensorT<T> mul_fwd(const TensorT<T>& a, const TensorT<T>& b) {
    Shape os;
    if (!broadcast_ok(a.shape, b.shape, os))
        throw ShapeError("mul: cannot broadcast " + a.shape.str() + " with " + b.shape.str());
    TensorT<T> y(os);
    for (int64_t bb = 0; bb < os.b; ++bb)
        for (int64_t c = 0; c < os.c; ++c)
            for (int64_t j = 0; j < os.h; ++j)
                for (int64_t i = 0; i < os.w; ++i)
                    y.at(bb, c, j, i) = a.at(a.shape.b == 1 ? 0 : bb, a.shape.c == 1 ? 0 : c,
                                             a.shape.h == 1 ? 0 : j, a.shape.w == 1 ? 0 : i) *
                                        b.at(b.shape.b == 1 ? 0 : bb, b.shape.c == 1 ? 0 : c,
                                             b.shape.h == 1 ? 0 : j, b.shape.w == 1 ? 0 : i);
    return y;
}

// Accumulates dy * other into da, reducing over axes where a is broadcast.
template <typename T>
void mul_bwd_one(const TensorT<T>& other, const Shape& as, const TensorT<T>& dy, TensorT<T>* da) {
    const Shape& os = dy.shape;
    for (int64_t bb = 0; bb < os.b; ++bb)
        for (int64_t c = 0; c < os.c; ++c)
            for (int64_t j = 0; j < os.h; ++j)
                for (int64_t i = 0; i < os.w; ++i) {
                    const T o = other.at(other.shape.b == 1 ? 0 : bb, other.shape.c == 1 ? 0 : c,
                                         other.shape.h == 1 ? 0 : j, other.shape.w == 1 ? 0 : i);
                    da->at(as.b == 1 ? 0 : bb, as.c == 1 ? 0 : c, as.h == 1 ? 0 : j, as.w == 1 ? 0 : i) +=
                        o * dy.at(bb, c, j, i);
                }
}

} // namespace mcaf

#endif
