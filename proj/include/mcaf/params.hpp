#ifndef MCAF_PARAMS_HPP
#define MCAF_PARAMS_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "mcaf/autograd.hpp"
#include "mcaf/tensor.hpp"

namespace mcaf {

// Named collection of learnable tensors with gradient slots. Insertion order
// is preserved; it defines the serialization order of the weight file.
template <typename T>
class ParamStoreT {
public:
    void add(const std::string& name, TensorT<T> value) {
        if (index_.count(name)) throw ShapeError("duplicate parameter: " + name);
        index_[name] = names_.size();
        names_.push_back(name);
        values_.push_back(std::move(value));
        grads_.emplace_back(values_.back().shape);
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    TensorT<T>& value(const std::string& name) { return values_[idx(name)]; }
    const TensorT<T>& value(const std::string& name) const { return values_[idx(name)]; }
    TensorT<T>& grad(const std::string& name) { return grads_[idx(name)]; }

    size_t count() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    TensorT<T>& value_at(size_t i) { return values_[i]; }
    const TensorT<T>& value_at(size_t i) const { return values_[i]; }
    TensorT<T>& grad_at(size_t i) { return grads_[i]; }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& v : values_) n += v.numel();
        return n;
    }

    void zero_grads() {
        for (auto& g : grads_) g.fill(T(0));
    }

    template <typename U>
    ParamStoreT<U> cast() const {
        ParamStoreT<U> out;
        for (size_t i = 0; i < names_.size(); ++i) out.add(names_[i], values_[i].template cast<U>());
        return out;
    }

private:
    size_t idx(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ShapeError("unknown parameter: " + name);
        return it->second;
    }

    std::vector<std::string> names_;
    std::unordered_map<std::string, size_t> index_;
    std::vector<TensorT<T>> values_;
    std::vector<TensorT<T>> grads_;
};

using ParamStore = ParamStoreT<float>;

// Pulls one parameter onto a tape as a leaf, caching so each parameter appears
// once per graph.
template <typename T>
class ParamBinder {
public:
    ParamBinder(Tape<T>& tape, const ParamStoreT<T>& store) : tape_(tape), store_(store) {}

    Var<T> operator()(const std::string& name) {
        auto it = cache_.find(name);
        if (it != cache_.end()) return it->second;
        Var<T> v = tape_.param(name, store_.value(name));
        cache_[name] = v;
        return v;
    }

    // Accumulate tape gradients back into the store after backward().
    void collect_grads(ParamStoreT<T>& store) const {
        for (const auto& [name, id] : tape_.param_leaves()) {
            const TensorT<T>& g = tape_.node(id).grad;
            if (g.empty()) continue;
            TensorT<T>& dst = store.grad(name);
            for (size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
        }
    }

private:
    Tape<T>& tape_;
    const ParamStoreT<T>& store_;
    std::unordered_map<std::string, Var<T>> cache_;
};

} // namespace mcaf

#endif
