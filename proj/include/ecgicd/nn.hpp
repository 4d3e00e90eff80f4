#ifndef ECGICD_NN_HPP
#define ECGICD_NN_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecgicd/rng.hpp"
#include "ecgicd/tensor.hpp"

namespace ecgicd::models {

struct ShapeMismatch : std::runtime_error {
    explicit ShapeMismatch(const std::string& what) : std::runtime_error("shape mismatch: " + what) {}
};

template <typename T>
void collect(std::vector<Param<T>*>& out, Param<T>& p) {
    out.push_back(&p);
}

// ---------------------------------------------------------------------
// Conv1d: zero-padded 1D convolution; k=1 doubles as a pointwise linear.
// ---------------------------------------------------------------------
template <typename T>
class Conv1d {
public:
    Conv1d() = default;
    Conv1d(std::string name, std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t stride,
           std::size_t pad, DetRng& rng)
        : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {
        w_.name = name + ".w";
        w_.init({out_c, in_c, k});
        b_.name = name + ".b";
        b_.init({out_c});
        // He-normal fan-in init, zero bias.
        const double std = std::sqrt(2.0 / static_cast<double>(in_c * k));
        for (auto& x : w_.w.v) x = static_cast<T>(rng.normal() * std);
    }

    std::size_t out_len(std::size_t l) const { return (l + 2 * pad_ - k_) / stride_ + 1; }

    void forward(const Act<T>& in, Act<T>& out) {
        if (in.c != in_c_) throw ShapeMismatch(w_.name + " input channels");
        in_cache_ = in;
        const std::size_t lo = out_len(in.l);
        out = Act<T>(in.n, out_c_, lo);
        const std::int64_t pad = static_cast<std::int64_t>(pad_);
        for (std::size_t b = 0; b < in.n; ++b) {
            for (std::size_t oc = 0; oc < out_c_; ++oc) {
                T* dst = out.row(b, oc);
                const T bias = b_.w.v[oc];
                for (std::size_t t = 0; t < lo; ++t) dst[t] = bias;
                for (std::size_t ic = 0; ic < in_c_; ++ic) {
                    const T* src = in.row(b, ic);
                    const T* wk = &w_.w.v[(oc * in_c_ + ic) * k_];
                    for (std::size_t t = 0; t < lo; ++t) {
                        const std::int64_t start = static_cast<std::int64_t>(t * stride_) - pad;
                        T acc = 0;
                        for (std::size_t kk = 0; kk < k_; ++kk) {
                            const std::int64_t p = start + static_cast<std::int64_t>(kk);
                            if (p >= 0 && p < static_cast<std::int64_t>(in.l)) acc += wk[kk] * src[p];
                        }
                        dst[t] += acc;
                    }
                }
            }
        }
    }

    void backward(const Act<T>& gout, Act<T>& gin) {
        const Act<T>& in = in_cache_;
        gin = Act<T>(in.n, in.c, in.l);
        const std::int64_t pad = static_cast<std::int64_t>(pad_);
        for (std::size_t b = 0; b < in.n; ++b) {
            for (std::size_t oc = 0; oc < out_c_; ++oc) {
                const T* go = gout.row(b, oc);
                for (std::size_t t = 0; t < gout.l; ++t) b_.g.v[oc] += go[t];
                for (std::size_t ic = 0; ic < in_c_; ++ic) {
                    const T* src = in.row(b, ic);
                    T* gi = gin.row(b, ic);
                    const T* wk = &w_.w.v[(oc * in_c_ + ic) * k_];
                    T* gw = &w_.g.v[(oc * in_c_ + ic) * k_];
                    for (std::size_t t = 0; t < gout.l; ++t) {
                        const std::int64_t start = static_cast<std::int64_t>(t * stride_) - pad;
                        const T g = go[t];
                        for (std::size_t kk = 0; kk < k_; ++kk) {
                            const std::int64_t p = start + static_cast<std::int64_t>(kk);
                            if (p >= 0 && p < static_cast<std::int64_t>(in.l)) {
                                gw[kk] += g * src[p];
                                gi[p] += g * wk[kk];
                            }
                        }
                    }
                }
            }
        }
    }

    void params(std::vector<Param<T>*>& out) {
        collect(out, w_);
        collect(out, b_);
    }

private:
    std::size_t in_c_ = 0, out_c_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
    Param<T> w_, b_;
    Act<T> in_cache_;
};

// ---------------------------------------------------------------------
// BatchNorm1d over (batch, time) per channel. Training mode normalizes
// with biased batch statistics and refreshes the running estimates;
// inference mode uses the running estimates, which makes the forward
// batch-size independent.
// ---------------------------------------------------------------------
template <typename T>
class BatchNorm1d {
public:
    BatchNorm1d() = default;
    BatchNorm1d(std::string name, std::size_t c, T momentum = T(0.1), T eps = T(1e-5))
        : c_(c), momentum_(momentum), eps_(eps) {
        gamma_.name = name + ".gamma";
        gamma_.init({c});
        beta_.name = name + ".beta";
        beta_.init({c});
        run_mean_.name = name + ".running_mean";
        run_mean_.init({c});
        run_mean_.trainable = false;
        run_var_.name = name + ".running_var";
        run_var_.init({c});
        run_var_.trainable = false;
        for (auto& x : gamma_.w.v) x = T(1);
        for (auto& x : run_var_.w.v) x = T(1);
    }

    void zero_init_gamma() { gamma_.w.zero(); }

    void forward(const Act<T>& in, Act<T>& out, bool train) {
        if (in.c != c_) throw ShapeMismatch(gamma_.name + " channels");
        out = Act<T>(in.n, in.c, in.l);
        const std::size_t m = in.n * in.l;
        train_cache_ = train;
        mean_.assign(c_, T(0));
        invstd_.assign(c_, T(0));
        for (std::size_t ch = 0; ch < c_; ++ch) {
            T mean, var;
            if (train) {
                T s = 0;
                for (std::size_t b = 0; b < in.n; ++b) {
                    const T* src = in.row(b, ch);
                    for (std::size_t t = 0; t < in.l; ++t) s += src[t];
                }
                mean = s / static_cast<T>(m);
                T s2 = 0;
                for (std::size_t b = 0; b < in.n; ++b) {
                    const T* src = in.row(b, ch);
                    for (std::size_t t = 0; t < in.l; ++t) {
                        const T d = src[t] - mean;
                        s2 += d * d;
                    }
                }
                var = s2 / static_cast<T>(m);
                run_mean_.w.v[ch] = (T(1) - momentum_) * run_mean_.w.v[ch] + momentum_ * mean;
                run_var_.w.v[ch] = (T(1) - momentum_) * run_var_.w.v[ch] + momentum_ * var;
            } else {
                mean = run_mean_.w.v[ch];
                var = run_var_.w.v[ch];
            }
            const T invstd = T(1) / std::sqrt(var + eps_);
            mean_[ch] = mean;
            invstd_[ch] = invstd;
            const T g = gamma_.w.v[ch];
            const T be = beta_.w.v[ch];
            for (std::size_t b = 0; b < in.n; ++b) {
                const T* src = in.row(b, ch);
                T* dst = out.row(b, ch);
                for (std::size_t t = 0; t < in.l; ++t) dst[t] = (src[t] - mean) * invstd * g + be;
            }
        }
        in_cache_ = in;
    }

    void backward(const Act<T>& gout, Act<T>& gin) {
        const Act<T>& in = in_cache_;
        gin = Act<T>(in.n, in.c, in.l);
        const std::size_t m = in.n * in.l;
        for (std::size_t ch = 0; ch < c_; ++ch) {
            const T mean = mean_[ch];
            const T invstd = invstd_[ch];
            const T g = gamma_.w.v[ch];
            T sum_g = 0, sum_gx = 0;
            for (std::size_t b = 0; b < in.n; ++b) {
                const T* go = gout.row(b, ch);
                const T* src = in.row(b, ch);
                for (std::size_t t = 0; t < in.l; ++t) {
                    sum_g += go[t];
                    sum_gx += go[t] * (src[t] - mean) * invstd;
                }
            }
            gamma_.g.v[ch] += sum_gx;
            beta_.g.v[ch] += sum_g;
            if (train_cache_) {
                const T inv_m = T(1) / static_cast<T>(m);
                for (std::size_t b = 0; b < in.n; ++b) {
                    const T* go = gout.row(b, ch);
                    const T* src = in.row(b, ch);
                    T* gi = gin.row(b, ch);
                    for (std::size_t t = 0; t < in.l; ++t) {
                        const T xhat = (src[t] - mean) * invstd;
                        gi[t] = g * invstd * (go[t] - inv_m * sum_g - xhat * inv_m * sum_gx);
                    }
                }
            } else {
                for (std::size_t b = 0; b < in.n; ++b) {
                    const T* go = gout.row(b, ch);
                    T* gi = gin.row(b, ch);
                    for (std::size_t t = 0; t < in.l; ++t) gi[t] = g * invstd * go[t];
                }
            }
        }
    }

    void params(std::vector<Param<T>*>& out) {
        collect(out, gamma_);
        collect(out, beta_);
        collect(out, run_mean_);
        collect(out, run_var_);
    }

private:
    std::size_t c_ = 0;
    T momentum_ = T(0.1), eps_ = T(1e-5);
    Param<T> gamma_, beta_, run_mean_, run_var_;
    Act<T> in_cache_;
    std::vector<T> mean_, invstd_;
    bool train_cache_ = false;
};

// ---------------------------------------------------------------------
// LayerNorm across channels at each (batch, time) position.
// ---------------------------------------------------------------------
template <typename T>
class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(std::string name, std::size_t c, T eps = T(1e-5)) : c_(c), eps_(eps) {
        gamma_.name = name + ".gamma";
        gamma_.init({c});
        beta_.name = name + ".beta";
        beta_.init({c});
        for (auto& x : gamma_.w.v) x = T(1);
    }

    void forward(const Act<T>& in, Act<T>& out) {
        if (in.c != c_) throw ShapeMismatch(gamma_.name + " channels");
        out = Act<T>(in.n, in.c, in.l);
        in_cache_ = in;
        mean_.assign(in.n * in.l, T(0));
        invstd_.assign(in.n * in.l, T(0));
        const T inv_c = T(1) / static_cast<T>(c_);
        for (std::size_t b = 0; b < in.n; ++b) {
            for (std::size_t t = 0; t < in.l; ++t) {
                T s = 0;
                for (std::size_t ch = 0; ch < c_; ++ch) s += in.at(b, ch, t);
                const T mean = s * inv_c;
                T s2 = 0;
                for (std::size_t ch = 0; ch < c_; ++ch) {
                    const T d = in.at(b, ch, t) - mean;
                    s2 += d * d;
                }
                const T invstd = T(1) / std::sqrt(s2 * inv_c + eps_);
                mean_[b * in.l + t] = mean;
                invstd_[b * in.l + t] = invstd;
                for (std::size_t ch = 0; ch < c_; ++ch)
                    out.at(b, ch, t) = (in.at(b, ch, t) - mean) * invstd * gamma_.w.v[ch] + beta_.w.v[ch];
            }
        }
    }

    void backward(const Act<T>& gout, Act<T>& gin) {
        const Act<T>& in = in_cache_;
        gin = Act<T>(in.n, in.c, in.l);
        const T inv_c = T(1) / static_cast<T>(c_);
        for (std::size_t b = 0; b < in.n; ++b) {
            for (std::size_t t = 0; t < in.l; ++t) {
                const T mean = mean_[b * in.l + t];
                const T invstd = invstd_[b * in.l + t];
                T sum_g = 0, sum_gx = 0;
                for (std::size_t ch = 0; ch < c_; ++ch) {
                    const T xhat = (in.at(b, ch, t) - mean) * invstd;
                    const T gg = gout.at(b, ch, t) * gamma_.w.v[ch];
                    gamma_.g.v[ch] += gout.at(b, ch, t) * xhat;
                    beta_.g.v[ch] += gout.at(b, ch, t);
                    sum_g += gg;
                    sum_gx += gg * xhat;
                }
                for (std::size_t ch = 0; ch < c_; ++ch) {
                    const T xhat = (in.at(b, ch, t) - mean) * invstd;
                    const T gg = gout.at(b, ch, t) * gamma_.w.v[ch];
                    gin.at(b, ch, t) = invstd * (gg - inv_c * sum_g - xhat * inv_c * sum_gx);
                }
            }
        }
    }

    void params(std::vector<Param<T>*>& out) {
        collect(out, gamma_);
        collect(out, beta_);
    }

private:
    std::size_t c_ = 0;
    T eps_ = T(1e-5);
    Param<T> gamma_, beta_;
    Act<T> in_cache_;
    std::vector<T> mean_, invstd_;
};

// ---------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------
template <typename T>
class ReLU {
public:
    void forward(const Act<T>& in, Act<T>& out) {
        in_cache_ = in;
        out = in;
        for (auto& x : out.v) x = x > T(0) ? x : T(0);
    }
    void backward(const Act<T>& gout, Act<T>& gin) {
        gin = gout;
        for (std::size_t i = 0; i < gin.v.size(); ++i)
            if (in_cache_.v[i] <= T(0)) gin.v[i] = T(0);
    }

private:
    Act<T> in_cache_;
};

template <typename T>
class Gelu {
public:
    void forward(const Act<T>& in, Act<T>& out) {
        in_cache_ = in;
        out = in;
        for (auto& x : out.v) x = gelu(x);
    }
    void backward(const Act<T>& gout, Act<T>& gin) {
        gin = gout;
        for (std::size_t i = 0; i < gin.v.size(); ++i) gin.v[i] *= dgelu(in_cache_.v[i]);
    }

    static T gelu(T x) {
        return T(0.5) * x * (T(1) + std::erf(x * T(0.70710678118654752440)));
    }
    static T dgelu(T x) {
        const T phi = T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440)));
        const T pdf = T(0.39894228040143267794) * std::exp(T(-0.5) * x * x);
        return phi + x * pdf;
    }

private:
    Act<T> in_cache_;
};

/// Inverted dropout; identity in eval mode.
template <typename T>
class Dropout {
public:
    Dropout() = default;
    Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) {}

    void forward(const Act<T>& in, Act<T>& out, bool train) {
        out = in;
        if (!train || p_ <= 0.0) {
            mask_.clear();
            return;
        }
        mask_.assign(in.v.size(), T(0));
        const T scale = T(1.0 / (1.0 - p_));
        for (std::size_t i = 0; i < in.v.size(); ++i) {
            if (rng_.real01() >= p_) {
                mask_[i] = scale;
                out.v[i] = in.v[i] * scale;
            } else {
                out.v[i] = T(0);
            }
        }
    }
    void backward(const Act<T>& gout, Act<T>& gin) {
        gin = gout;
        if (mask_.empty()) return;
        for (std::size_t i = 0; i < gin.v.size(); ++i) gin.v[i] *= mask_[i];
    }

private:
    double p_ = 0.0;
    DetRng rng_{0};
    std::vector<T> mask_;
};

// ---------------------------------------------------------------------
// MaxPool1d with -inf padding.
// ---------------------------------------------------------------------
template <typename T>
class MaxPool1d {
public:
    MaxPool1d() = default;
    MaxPool1d(std::size_t k, std::size_t stride, std::size_t pad) : k_(k), stride_(stride), pad_(pad) {}

    std::size_t out_len(std::size_t l) const { return (l + 2 * pad_ - k_) / stride_ + 1; }

    void forward(const Act<T>& in, Act<T>& out) {
        const std::size_t lo = out_len(in.l);
        out = Act<T>(in.n, in.c, lo);
        arg_.assign(in.n * in.c * lo, 0);
        in_shape_ = {in.n, in.c, in.l};
        for (std::size_t b = 0; b < in.n; ++b) {
            for (std::size_t ch = 0; ch < in.c; ++ch) {
                const T* src = in.row(b, ch);
                T* dst = out.row(b, ch);
                for (std::size_t t = 0; t < lo; ++t) {
                    const std::int64_t start =
                        static_cast<std::int64_t>(t * stride_) - static_cast<std::int64_t>(pad_);
                    T best = -std::numeric_limits<T>::infinity();
                    std::size_t best_p = 0;
                    for (std::size_t kk = 0; kk < k_; ++kk) {
                        const std::int64_t p = start + static_cast<std::int64_t>(kk);
                        if (p < 0 || p >= static_cast<std::int64_t>(in.l)) continue;
                        if (src[p] > best) {
                            best = src[p];
                            best_p = static_cast<std::size_t>(p);
                        }
                    }
                    dst[t] = best;
                    arg_[(b * in.c + ch) * lo + t] = best_p;
                }
            }
        }
    }

    void backward(const Act<T>& gout, Act<T>& gin) {
        gin = Act<T>(in_shape_[0], in_shape_[1], in_shape_[2]);
        for (std::size_t b = 0; b < gout.n; ++b)
            for (std::size_t ch = 0; ch < gout.c; ++ch) {
                const T* go = gout.row(b, ch);
                T* gi = gin.row(b, ch);
                for (std::size_t t = 0; t < gout.l; ++t)
                    gi[arg_[(b * gout.c + ch) * gout.l + t]] += go[t];
            }
    }

private:
    std::size_t k_ = 2, stride_ = 2, pad_ = 0;
    std::vector<std::size_t> arg_;
    std::vector<std::size_t> in_shape_{0, 0, 0};
};

// ---------------------------------------------------------------------
// Global mean pooling over time: (n, c, l) -> (n, c).
// ---------------------------------------------------------------------
template <typename T>
class GlobalMeanPool {
public:
    void forward(const Act<T>& in, Mat<T>& out) {
        out = Mat<T>(in.n, in.c);
        len_ = in.l;
        n_ = in.n;
        c_ = in.c;
        const T inv = T(1) / static_cast<T>(in.l);
        for (std::size_t b = 0; b < in.n; ++b)
            for (std::size_t ch = 0; ch < in.c; ++ch) {
                const T* src = in.row(b, ch);
                T s = 0;
                for (std::size_t t = 0; t < in.l; ++t) s += src[t];
                out.at(b, ch) = s * inv;
            }
    }
    void backward(const Mat<T>& gout, Act<T>& gin) {
        gin = Act<T>(n_, c_, len_);
        const T inv = T(1) / static_cast<T>(len_);
        for (std::size_t b = 0; b < n_; ++b)
            for (std::size_t ch = 0; ch < c_; ++ch) {
                const T g = gout.at(b, ch) * inv;
                T* gi = gin.row(b, ch);
                for (std::size_t t = 0; t < len_; ++t) gi[t] = g;
            }
    }

private:
    std::size_t len_ = 0, n_ = 0, c_ = 0;
};

// ---------------------------------------------------------------------
// Linear head on pooled features.
// ---------------------------------------------------------------------
template <typename T>
class Linear {
public:
    Linear() = default;
    Linear(std::string name, std::size_t in_f, std::size_t out_f, DetRng& rng)
        : in_f_(in_f), out_f_(out_f) {
        w_.name = name + ".w";
        w_.init({out_f, in_f});
        b_.name = name + ".b";
        b_.init({out_f});
        const double std = std::sqrt(1.0 / static_cast<double>(in_f));
        for (auto& x : w_.w.v) x = static_cast<T>(rng.normal() * std);
    }

    void forward(const Mat<T>& in, Mat<T>& out) {
        if (in.f != in_f_) throw ShapeMismatch(w_.name + " input features");
        in_cache_ = in;
        out = Mat<T>(in.n, out_f_);
        for (std::size_t i = 0; i < in.n; ++i)
            for (std::size_t o = 0; o < out_f_; ++o) {
                T s = b_.w.v[o];
                const T* wr = &w_.w.v[o * in_f_];
                for (std::size_t j = 0; j < in_f_; ++j) s += wr[j] * in.at(i, j);
                out.at(i, o) = s;
            }
    }

    void backward(const Mat<T>& gout, Mat<T>& gin) {
        gin = Mat<T>(in_cache_.n, in_f_);
        for (std::size_t i = 0; i < in_cache_.n; ++i)
            for (std::size_t o = 0; o < out_f_; ++o) {
                const T g = gout.at(i, o);
                b_.g.v[o] += g;
                const T* wr = &w_.w.v[o * in_f_];
                T* gw = &w_.g.v[o * in_f_];
                for (std::size_t j = 0; j < in_f_; ++j) {
                    gw[j] += g * in_cache_.at(i, j);
                    gin.at(i, j) += g * wr[j];
                }
            }
    }

    void params(std::vector<Param<T>*>& out) {
        collect(out, w_);
        collect(out, b_);
    }

private:
    std::size_t in_f_ = 0, out_f_ = 0;
    Param<T> w_, b_;
    Mat<T> in_cache_;
};

}  // namespace ecgicd::models

#endif
