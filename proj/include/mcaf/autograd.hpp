#ifndef MCAF_AUTOGRAD_HPP
#define MCAF_AUTOGRAD_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mcaf/ops.hpp"
#include "mcaf/tensor.hpp"

// Tape-based reverse-mode automatic differentiation. Nodes are appended in
// topological order (an op can only reference vars that already exist), so the
// backward pass is a single reverse sweep over the nodes reachable from the
// loss. Gradients are allocated lazily: a pure inference pass never pays for
// them.

namespace mcaf {

template <typename T>
class Tape;

template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const TensorT<T>& val() const;
    const Shape& shape() const { return val().shape; }
};

template <typename T>
class Tape {
public:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad; // empty until backward touches it
        std::vector<int> parents;
        std::function<void(Tape&, int)> backward;
        std::string tag;
    };

    Var<T> leaf(TensorT<T> value, const std::string& tag = "leaf") {
        return push(std::move(value), {}, nullptr, tag);
    }

    // Leaf that mirrors a named parameter; grads flow back to it by name.
    Var<T> param(const std::string& name, TensorT<T> value) {
        Var<T> v = push(std::move(value), {}, nullptr, name);
        param_leaves_.emplace_back(name, v.id);
        return v;
    }

    Var<T> push(TensorT<T> value, std::vector<int> parents,
                std::function<void(Tape&, int)> backward, const std::string& tag) {
        if (!value.all_finite()) throw NumericError("non-finite values produced by " + tag);
        nodes_.push_back(Node{std::move(value), TensorT<T>{}, std::move(parents), std::move(backward), tag});
        return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
    }

    Node& node(int id) { return nodes_[static_cast<size_t>(id)]; }
    const Node& node(int id) const { return nodes_[static_cast<size_t>(id)]; }
    size_t size() const { return nodes_.size(); }

    TensorT<T>& grad_of(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.grad.empty()) n.grad = TensorT<T>(n.value.shape);
        return n.grad;
    }

    // Seeds d(root)/d(root) = 1 and sweeps the reachable subgraph once.
    void backward(Var<T> root) {
        if (root.tape != this) throw ShapeError("backward: var belongs to another tape");
        const Node& r = nodes_[static_cast<size_t>(root.id)];
        if (r.value.numel() != 1) throw ShapeError("backward: root must be scalar, got " + r.value.shape.str());

        std::vector<char> reachable(nodes_.size(), 0);
        std::vector<int> stack{root.id};
        reachable[static_cast<size_t>(root.id)] = 1;
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            for (int p : nodes_[static_cast<size_t>(id)].parents)
                if (!reachable[static_cast<size_t>(p)]) {
                    reachable[static_cast<size_t>(p)] = 1;
                    stack.push_back(p);
                }
        }
        grad_of(root.id).data[0] = T(1);
        for (int id = root.id; id >= 0; --id) {
            if (!reachable[static_cast<size_t>(id)]) continue;
            Node& n = nodes_[static_cast<size_t>(id)];
            if (n.backward && !n.grad.empty()) n.backward(*this, id);
        }
    }

    const std::vector<std::pair<std::string, int>>& param_leaves() const { return param_leaves_; }

private:
    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, int>> param_leaves_;
};

template <typename T>
const TensorT<T>& Var<T>::val() const {
    return tape->node(id).value;
}

// ---------------------------------------------------------------------------
// op bindings

template <typename T>
Var<T> conv2d(Var<T> x, Var<T> w, Var<T> b, int stride = 1, int pad = 0, int groups = 1) {
    Tape<T>& tp = *x.tape;
    const TensorT<T>* bias = b.valid() ? &b.val() : nullptr;
    TensorT<T> y = conv2d_fwd(x.val(), w.val(), bias, stride, pad, groups);
    std::vector<int> parents{x.id, w.id};
    if (b.valid()) parents.push_back(b.id);
    const int xid = x.id, wid = w.id, bid = b.valid() ? b.id : -1;
    return tp.push(std::move(y), parents,
                   [xid, wid, bid, stride, pad, groups](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>* db = bid >= 0 ? &t.grad_of(bid) : nullptr;
                       conv2d_bwd(t.node(xid).value, t.node(wid).value, dy, stride, pad, groups,
                                  &t.grad_of(xid), &t.grad_of(wid), db);
                   },
                   "conv2d");
}

template <typename T>
Var<T> bilinear_resize(Var<T> x, int64_t oh, int64_t ow) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = bilinear_fwd(x.val(), oh, ow);
    const int xid = x.id;
    const Shape xs = x.shape();
    return tp.push(std::move(y), {x.id},
                   [xid, xs](Tape<T>& t, int self) {
                       bilinear_bwd(xs, t.node(self).grad, &t.grad_of(xid));
                   },
                   "bilinear_resize");
}

template <typename T>
Var<T> pixel_shuffle(Var<T> x, int r) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = pixel_shuffle_fwd(x.val(), r);
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid, r](Tape<T>& t, int self) {
                       TensorT<T> g = pixel_unshuffle(t.node(self).grad, r);
                       TensorT<T>& dx = t.grad_of(xid);
                       for (size_t i = 0; i < g.data.size(); ++i) dx.data[i] += g.data[i];
                   },
                   "pixel_shuffle");
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps = 1e-5) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = layer_norm_fwd(x.val(), gamma.val(), beta.val(), eps);
    const int xid = x.id, gid = gamma.id, bid = beta.id;
    return tp.push(std::move(y), {x.id, gamma.id, beta.id},
                   [xid, gid, bid, eps](Tape<T>& t, int self) {
                       layer_norm_bwd(t.node(xid).value, t.node(gid).value, eps, t.node(self).grad,
                                      &t.grad_of(xid), &t.grad_of(gid), &t.grad_of(bid));
                   },
                   "layer_norm");
}

template <typename T>
Var<T> softmax(Var<T> x, int axis, double scale = 1.0) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = softmax_fwd(x.val(), axis, scale);
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid, axis, scale](Tape<T>& t, int self) {
                       softmax_bwd(t.node(self).value, axis, scale, t.node(self).grad, &t.grad_of(xid));
                   },
                   "softmax");
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
    Tape<T>& tp = *a.tape;
    TensorT<T> y = matmul_fwd(a.val(), b.val());
    const int aid = a.id, bid = b.id;
    return tp.push(std::move(y), {a.id, b.id},
                   [aid, bid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       const TensorT<T>& av = t.node(aid).value;
                       const TensorT<T>& bv = t.node(bid).value;
                       TensorT<T>& da = t.grad_of(aid);
                       TensorT<T>& db = t.grad_of(bid);
                       for (int64_t n = 0; n < av.shape.b; ++n)
                           for (int64_t i = 0; i < av.shape.h; ++i)
                               for (int64_t j = 0; j < bv.shape.w; ++j) {
                                   const T g = dy.at(n, 0, i, j);
                                   for (int64_t k = 0; k < av.shape.w; ++k) {
                                       da.at(n, 0, i, k) += g * bv.at(n, 0, k, j);
                                       db.at(n, 0, k, j) += g * av.at(n, 0, i, k);
                                   }
                               }
                   },
                   "matmul");
}

template <typename T>
Var<T> matmul_bt(Var<T> a, Var<T> b) {
    Tape<T>& tp = *a.tape;
    TensorT<T> y = matmul_bt_fwd(a.val(), b.val());
    const int aid = a.id, bid = b.id;
    return tp.push(std::move(y), {a.id, b.id},
                   [aid, bid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       const TensorT<T>& av = t.node(aid).value;
                       const TensorT<T>& bv = t.node(bid).value;
                       TensorT<T>& da = t.grad_of(aid);
                       TensorT<T>& db = t.grad_of(bid);
                       for (int64_t n = 0; n < av.shape.b; ++n)
                           for (int64_t i = 0; i < av.shape.h; ++i)
                               for (int64_t j = 0; j < bv.shape.h; ++j) {
                                   const T g = dy.at(n, 0, i, j);
                                   for (int64_t k = 0; k < av.shape.w; ++k) {
                                       da.at(n, 0, i, k) += g * bv.at(n, 0, j, k);
                                       db.at(n, 0, j, k) += g * av.at(n, 0, i, k);
                                   }
                               }
                   },
                   "matmul_bt");
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
    Tape<T>& tp = *a.tape;
    TensorT<T> y = mul_fwd(a.val(), b.val());
    const int aid = a.id, bid = b.id;
    return tp.push(std::move(y), {a.id, b.id},
                   [aid, bid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       mul_bwd_one(t.node(bid).value, t.node(aid).value.shape, dy, &t.grad_of(aid));
                       mul_bwd_one(t.node(aid).value, t.node(bid).value.shape, dy, &t.grad_of(bid));
                   },
                   "mul");
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    Tape<T>& tp = *a.tape;
    require_shape(b.val(), a.shape(), "add");
    TensorT<T> y = a.val();
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += b.val().data[i];
    const int aid = a.id, bid = b.id;
    return tp.push(std::move(y), {a.id, b.id},
                   [aid, bid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>& da = t.grad_of(aid);
                       TensorT<T>& db = t.grad_of(bid);
                       for (size_t i = 0; i < dy.data.size(); ++i) {
                           da.data[i] += dy.data[i];
                           db.data[i] += dy.data[i];
                       }
                   },
                   "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
    Tape<T>& tp = *a.tape;
    require_shape(b.val(), a.shape(), "sub");
    TensorT<T> y = a.val();
    for (size_t i = 0; i < y.data.size(); ++i) y.data[i] -= b.val().data[i];
    const int aid = a.id, bid = b.id;
    return tp.push(std::move(y), {a.id, b.id},
                   [aid, bid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>& da = t.grad_of(aid);
                       TensorT<T>& db = t.grad_of(bid);
                       for (size_t i = 0; i < dy.data.size(); ++i) {
                           da.data[i] += dy.data[i];
                           db.data[i] -= dy.data[i];
                       }
                   },
                   "sub");
}

template <typename T>
Var<T> scale_const(Var<T> x, double s) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = x.val();
    for (T& v : y.data) v = static_cast<T>(v * s);
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid, s](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (size_t i = 0; i < dy.data.size(); ++i) dx.data[i] += static_cast<T>(dy.data[i] * s);
                   },
                   "scale_const");
}

template <typename T>
Var<T> gelu(Var<T> x) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = x.val();
    for (T& v : y.data) {
        const double z = static_cast<double>(v);
        v = static_cast<T>(0.5 * z * (1.0 + std::erf(z * 0.70710678118654752440)));
    }
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       const TensorT<T>& xv = t.node(xid).value;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (size_t i = 0; i < dy.data.size(); ++i) {
                           const double z = static_cast<double>(xv.data[i]);
                           const double cdf = 0.5 * (1.0 + std::erf(z * 0.70710678118654752440));
                           const double pdf = std::exp(-0.5 * z * z) * 0.39894228040143267794;
                           dx.data[i] += static_cast<T>(static_cast<double>(dy.data[i]) * (cdf + z * pdf));
                       }
                   },
                   "gelu");
}

template <typename T>
Var<T> relu(Var<T> x) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = x.val();
    for (T& v : y.data) v = v > T(0) ? v : T(0);
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       const TensorT<T>& xv = t.node(xid).value;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (size_t i = 0; i < dy.data.size(); ++i)
                           if (xv.data[i] > T(0)) dx.data[i] += dy.data[i];
                   },
                   "relu");
}

template <typename T>
Var<T> sigmoid(Var<T> x) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = x.val();
    for (T& v : y.data) v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       const TensorT<T>& yv = t.node(self).value;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (size_t i = 0; i < dy.data.size(); ++i)
                           dx.data[i] += dy.data[i] * yv.data[i] * (T(1) - yv.data[i]);
                   },
                   "sigmoid");
}

template <typename T>
Var<T> clamp(Var<T> x, double lo, double hi) {
    Tape<T>& tp = *x.tape;
    TensorT<T> y = x.val();
    for (T& v : y.data) v = static_cast<T>(std::clamp(static_cast<double>(v), lo, hi));
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid, lo, hi](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       const TensorT<T>& xv = t.node(xid).value;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (size_t i = 0; i < dy.data.size(); ++i) {
                           const double v = static_cast<double>(xv.data[i]);
                           if (v >= lo && v <= hi) dx.data[i] += dy.data[i];
                       }
                   },
                   "clamp");
}

template <typename T>
Var<T> reshape(Var<T> x, Shape s) {
    Tape<T>& tp = *x.tape;
    if (s.numel() != x.val().numel())
        throw ShapeError("reshape: element count mismatch " + x.shape().str() + " -> " + s.str());
    TensorT<T> y(s);
    y.data = x.val().data;
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (size_t i = 0; i < dy.data.size(); ++i) dx.data[i] += dy.data[i];
                   },
                   "reshape");
}

// Channel slice [c0, c1).
template <typename T>
Var<T> channel_slice(Var<T> x, int64_t c0, int64_t c1) {
    Tape<T>& tp = *x.tape;
    const Shape& xs = x.shape();
    if (c0 < 0 || c1 > xs.c || c0 >= c1) throw ShapeError("channel_slice: bad range");
    TensorT<T> y(Shape{xs.b, c1 - c0, xs.h, xs.w});
    const TensorT<T>& xv = x.val();
    for (int64_t b = 0; b < xs.b; ++b)
        for (int64_t c = c0; c < c1; ++c)
            for (int64_t j = 0; j < xs.h; ++j)
                for (int64_t i = 0; i < xs.w; ++i) y.at(b, c - c0, j, i) = xv.at(b, c, j, i);
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid, c0](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (int64_t b = 0; b < dy.shape.b; ++b)
                           for (int64_t c = 0; c < dy.shape.c; ++c)
                               for (int64_t j = 0; j < dy.shape.h; ++j)
                                   for (int64_t i = 0; i < dy.shape.w; ++i)
                                       dx.at(b, c + c0, j, i) += dy.at(b, c, j, i);
                   },
                   "channel_slice");
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
    if (xs.empty()) throw ShapeError("concat: no inputs");
    Tape<T>& tp = *xs[0].tape;
    const Shape s0 = xs[0].shape();
    int64_t ctot = 0;
    for (const auto& v : xs) {
        const Shape& s = v.shape();
        if (s.b != s0.b || s.h != s0.h || s.w != s0.w)
            throw ShapeError("concat: mismatched shapes " + s0.str() + " vs " + s.str());
        ctot += s.c;
    }
    TensorT<T> y(Shape{s0.b, ctot, s0.h, s0.w});
    std::vector<int> parents;
    std::vector<int64_t> offs;
    int64_t off = 0;
    for (const auto& v : xs) {
        parents.push_back(v.id);
        offs.push_back(off);
        const TensorT<T>& xv = v.val();
        for (int64_t b = 0; b < s0.b; ++b)
            for (int64_t c = 0; c < xv.shape.c; ++c)
                for (int64_t j = 0; j < s0.h; ++j)
                    for (int64_t i = 0; i < s0.w; ++i) y.at(b, off + c, j, i) = xv.at(b, c, j, i);
        off += xv.shape.c;
    }
    return tp.push(std::move(y), parents,
                   [parents, offs](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       for (size_t n = 0; n < parents.size(); ++n) {
                           TensorT<T>& dx = t.grad_of(parents[n]);
                           for (int64_t b = 0; b < dx.shape.b; ++b)
                               for (int64_t c = 0; c < dx.shape.c; ++c)
                                   for (int64_t j = 0; j < dx.shape.h; ++j)
                                       for (int64_t i = 0; i < dx.shape.w; ++i)
                                           dx.at(b, c, j, i) += dy.at(b, offs[n] + c, j, i);
                       }
                   },
                   "concat");
}

// Global average pool over (h, w) -> (b, c, 1, 1).
template <typename T>
Var<T> global_avg_pool(Var<T> x) {
    Tape<T>& tp = *x.tape;
    const Shape& xs = x.shape();
    TensorT<T> y(Shape{xs.b, xs.c, 1, 1});
    const double inv = 1.0 / static_cast<double>(xs.h * xs.w);
    for (int64_t b = 0; b < xs.b; ++b)
        for (int64_t c = 0; c < xs.c; ++c) {
            double acc = 0;
            for (int64_t j = 0; j < xs.h; ++j)
                for (int64_t i = 0; i < xs.w; ++i) acc += x.val().at(b, c, j, i);
            y.at(b, c, 0, 0) = static_cast<T>(acc * inv);
        }
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid, inv](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (int64_t b = 0; b < dx.shape.b; ++b)
                           for (int64_t c = 0; c < dx.shape.c; ++c) {
                               const T g = static_cast<T>(static_cast<double>(dy.at(b, c, 0, 0)) * inv);
                               for (int64_t j = 0; j < dx.shape.h; ++j)
                                   for (int64_t i = 0; i < dx.shape.w; ++i) dx.at(b, c, j, i) += g;
                           }
                   },
                   "global_avg_pool");
}

// Mean over channels -> (b, 1, h, w).
template <typename T>
Var<T> channel_mean(Var<T> x) {
    Tape<T>& tp = *x.tape;
    const Shape& xs = x.shape();
    TensorT<T> y(Shape{xs.b, 1, xs.h, xs.w});
    const double inv = 1.0 / static_cast<double>(xs.c);
    for (int64_t b = 0; b < xs.b; ++b)
        for (int64_t j = 0; j < xs.h; ++j)
            for (int64_t i = 0; i < xs.w; ++i) {
                double acc = 0;
                for (int64_t c = 0; c < xs.c; ++c) acc += x.val().at(b, c, j, i);
                y.at(b, 0, j, i) = static_cast<T>(acc * inv);
            }
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid, inv](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>& dx = t.grad_of(xid);
                       for (int64_t b = 0; b < dx.shape.b; ++b)
                           for (int64_t c = 0; c < dx.shape.c; ++c)
                               for (int64_t j = 0; j < dx.shape.h; ++j)
                                   for (int64_t i = 0; i < dx.shape.w; ++i)
                                       dx.at(b, c, j, i) += static_cast<T>(static_cast<double>(dy.at(b, 0, j, i)) * inv);
                   },
                   "channel_mean");
}

// Max over channels -> (b, 1, h, w); gradient routed to the argmax channel.
template <typename T>
Var<T> channel_max(Var<T> x) {
    Tape<T>& tp = *x.tape;
    const Shape& xs = x.shape();
    TensorT<T> y(Shape{xs.b, 1, xs.h, xs.w});
    std::vector<int64_t> argmax(static_cast<size_t>(xs.b * xs.h * xs.w));
    size_t n = 0;
    for (int64_t b = 0; b < xs.b; ++b)
        for (int64_t j = 0; j < xs.h; ++j)
            for (int64_t i = 0; i < xs.w; ++i, ++n) {
                T best = x.val().at(b, 0, j, i);
                int64_t bc = 0;
                for (int64_t c = 1; c < xs.c; ++c)
                    if (x.val().at(b, c, j, i) > best) {
                        best = x.val().at(b, c, j, i);
                        bc = c;
                    }
                y.at(b, 0, j, i) = best;
                argmax[n] = bc;
            }
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid, argmax](Tape<T>& t, int self) {
                       const TensorT<T>& dy = t.node(self).grad;
                       TensorT<T>& dx = t.grad_of(xid);
                       size_t n = 0;
                       for (int64_t b = 0; b < dx.shape.b; ++b)
                           for (int64_t j = 0; j < dx.shape.h; ++j)
                               for (int64_t i = 0; i < dx.shape.w; ++i, ++n)
                                   dx.at(b, argmax[n], j, i) += dy.at(b, 0, j, i);
                   },
                   "channel_max");
}

template <typename T>
Var<T> sum_all(Var<T> x) {
    Tape<T>& tp = *x.tape;
    double acc = 0;
    for (T v : x.val().data) acc += static_cast<double>(v);
    TensorT<T> y(Shape{1, 1, 1, 1});
    y.data[0] = static_cast<T>(acc);
    const int xid = x.id;
    return tp.push(std::move(y), {x.id},
                   [xid](Tape<T>& t, int self) {
                       const T g = t.node(self).grad.data[0];
                       TensorT<T>& dx = t.grad_of(xid);
                       for (T& v : dx.data) v += g;
                   },
                   "sum_all");
}

template <typename T>
Var<T> mean_all(Var<T> x) {
    return scale_const(sum_all(x), 1.0 / static_cast<double>(x.val().numel()));
}

} // namespace mcaf

#endif
