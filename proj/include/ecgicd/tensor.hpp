#ifndef ECGICD_TENSOR_HPP
#define ECGICD_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

namespace ecgicd::models {

/// Dense row-major tensor; shape is metadata only.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        v.assign(numel(shape), T(0));
    }

    static std::size_t numel(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }
    std::size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
};

/// Named parameter with its gradient accumulator. Non-trainable entries
/// (normalization running stats) are carried through checkpoints but
/// skipped by the optimizer.
template <typename T>
struct Param {
    std::string name;
    Tensor<T> w;
    Tensor<T> g;
    bool trainable = true;

    void init(std::vector<std::size_t> shape) {
        w = Tensor<T>(shape);
        g = Tensor<T>(std::move(shape));
    }
    void zero_grad() { g.zero(); }
};

/// Batch of multi-channel sequences, index (b, c, t) row-major.
template <typename T>
struct Act {
    std::size_t n = 0, c = 0, l = 0;
    std::vector<T> v;

    Act() = default;
    Act(std::size_t n_, std::size_t c_, std::size_t l_) : n(n_), c(c_), l(l_), v(n_ * c_ * l_, T(0)) {}

    T& at(std::size_t b, std::size_t ch, std::size_t t) { return v[(b * c + ch) * l + t]; }
    const T& at(std::size_t b, std::size_t ch, std::size_t t) const { return v[(b * c + ch) * l + t]; }
    T* row(std::size_t b, std::size_t ch) { return v.data() + (b * c + ch) * l; }
    const T* row(std::size_t b, std::size_t ch) const { return v.data() + (b * c + ch) * l; }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

/// Plain (rows, cols) matrix for pooled features / logits.
template <typename T>
struct Mat {
    std::size_t n = 0, f = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(std::size_t n_, std::size_t f_) : n(n_), f(f_), v(n_ * f_, T(0)) {}

    T& at(std::size_t i, std::size_t j) { return v[i * f + j]; }
    const T& at(std::size_t i, std::size_t j) const { return v[i * f + j]; }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

}  // namespace ecgicd::models

#endif
