#ifndef ECGICD_S4_HPP
#define ECGICD_S4_HPP

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ecgicd/nn.hpp"
#include "ecgicd/rng.hpp"
#include "ecgicd/tensor.hpp"

namespace ecgicd::models {

/// One direction of a diagonal state-space layer: d_model independent
/// SISO systems, each with d_state complex states, applied as a causal
/// convolution plus a direct feedthrough.
///
/// Discretization and kernel (normative, see docs/model-equations.md):
///   lambda_bar = exp(dt * lambda)
///   b_bar      = (lambda_bar - 1) / lambda * b
///   k[t]       = Re( sum_n c_n * lambda_bar_n^t * b_bar_n )
///   y[b,c,t]   = sum_{tau<=t} k[c,tau] * u[b,c,t-tau] + d[c] * u[b,c,t]
template <typename T>
class S4Ssm {
public:
    S4Ssm() = default;
    S4Ssm(std::string name, std::size_t d_model, std::size_t d_state, DetRng& rng)
        : c_(d_model), n_(d_state) {
        auto setup = [&](Param<T>& p, const char* suffix, std::vector<std::size_t> shape) {
            p.name = name + "." + suffix;
            p.init(std::move(shape));
        };
        setup(lambda_re_, "lambda_re", {c_, n_});
        setup(lambda_im_, "lambda_im", {c_, n_});
        setup(b_re_, "b_re", {c_, n_});
        setup(b_im_, "b_im", {c_, n_});
        setup(c_re_, "c_re", {c_, n_});
        setup(c_im_, "c_im", {c_, n_});
        setup(log_dt_, "log_dt", {c_});
        setup(d_, "d", {c_});
        // Poles at -1/2 + i*pi*n, unit input map, random output map, step
        // sizes log-uniform in [1e-3, 1e-1].
        for (std::size_t ch = 0; ch < c_; ++ch) {
            for (std::size_t n = 0; n < n_; ++n) {
                lambda_re_.w.v[ch * n_ + n] = T(-0.5);
                lambda_im_.w.v[ch * n_ + n] = static_cast<T>(3.14159265358979323846 * static_cast<double>(n));
                b_re_.w.v[ch * n_ + n] = T(1);
                b_im_.w.v[ch * n_ + n] = T(0);
                c_re_.w.v[ch * n_ + n] = static_cast<T>(rng.normal());
                c_im_.w.v[ch * n_ + n] = static_cast<T>(rng.normal());
            }
            const double u = rng.real01();
            log_dt_.w.v[ch] = static_cast<T>(std::log(1e-3) + u * (std::log(1e-1) - std::log(1e-3)));
            d_.w.v[ch] = T(1);
        }
    }

    std::size_t d_model() const { return c_; }
    std::uint64_t unstable_pole_warnings() const { return unstable_warnings_; }

    /// Convolution kernels for all channels, length L.
    std::vector<T> kernel(std::size_t L) {
        using C = std::complex<T>;
        std::vector<T> k(c_ * L, T(0));
        for (std::size_t ch = 0; ch < c_; ++ch) {
            const T dt = std::exp(log_dt_.w.v[ch]);
            for (std::size_t n = 0; n < n_; ++n) {
                const std::size_t i = ch * n_ + n;
                const C lam(lambda_re_.w.v[i], lambda_im_.w.v[i]);
                if (lam.real() >= T(0)) ++unstable_warnings_;
                const C lam_bar = std::exp(dt * lam);
                const C b_bar = (lam_bar - C(1)) / lam * C(b_re_.w.v[i], b_im_.w.v[i]);
                const C cc(c_re_.w.v[i], c_im_.w.v[i]);
                C p(1);  // lam_bar^t
                for (std::size_t t = 0; t < L; ++t) {
                    k[ch * L + t] += (cc * p * b_bar).real();
                    p *= lam_bar;
                }
            }
        }
        return k;
    }

    void forward(const Act<T>& in, Act<T>& out) {
        if (in.c != c_) throw ShapeMismatch(log_dt_.name + " channels");
        in_cache_ = in;
        kernel_cache_ = kernel(in.l);
        out = Act<T>(in.n, in.c, in.l);
        for (std::size_t b = 0; b < in.n; ++b) {
            for (std::size_t ch = 0; ch < c_; ++ch) {
                const T* u = in.row(b, ch);
                const T* k = &kernel_cache_[ch * in.l];
                T* y = out.row(b, ch);
                // y[t] += k[tau] * u[t - tau]; axpy form keeps the inner
                // loop contiguous.
                for (std::size_t tau = 0; tau < in.l; ++tau) {
                    const T kv = k[tau];
                    if (kv == T(0)) continue;
                    for (std::size_t t = tau; t < in.l; ++t) y[t] += kv * u[t - tau];
                }
                const T dv = d_.w.v[ch];
                for (std::size_t t = 0; t < in.l; ++t) y[t] += dv * u[t];
            }
        }
    }

    void backward(const Act<T>& gout, Act<T>& gin) {
        const Act<T>& in = in_cache_;
        const std::size_t L = in.l;
        gin = Act<T>(in.n, in.c, L);
        std::vector<T> gk(c_ * L, T(0));
        for (std::size_t b = 0; b < in.n; ++b) {
            for (std::size_t ch = 0; ch < c_; ++ch) {
                const T* u = in.row(b, ch);
                const T* go = gout.row(b, ch);
                const T* k = &kernel_cache_[ch * L];
                T* gi = gin.row(b, ch);
                T* gkc = &gk[ch * L];
                // gin[s] = sum_{t>=s} go[t] k[t-s];  gk[tau] = sum_t go[t] u[t-tau]
                for (std::size_t tau = 0; tau < L; ++tau) {
                    const T kv = k[tau];
                    T acc = 0;
                    for (std::size_t t = tau; t < L; ++t) {
                        gi[t - tau] += go[t] * kv;
                        acc += go[t] * u[t - tau];
                    }
                    gkc[tau] += acc;
                }
                const T dv = d_.w.v[ch];
                T gd = 0;
                for (std::size_t t = 0; t < L; ++t) {
                    gi[t] += dv * go[t];
                    gd += go[t] * u[t];
                }
                d_.g.v[ch] += gd;
            }
        }
        accumulate_kernel_grads(gk, L);
    }

    void params(std::vector<Param<T>*>& out) {
        collect(out, lambda_re_);
        collect(out, lambda_im_);
        collect(out, b_re_);
        collect(out, b_im_);
        collect(out, c_re_);
        collect(out, c_im_);
        collect(out, log_dt_);
        collect(out, d_);
    }

private:
    /// Chain dL/dk into the SSM parameters. For each channel/state the
    /// kernel entry is Re(f) with f holomorphic in lambda, b, c, so the
    /// real-parameter gradients are (Re f', -Im f').
    void accumulate_kernel_grads(const std::vector<T>& gk, std::size_t L) {
        using C = std::complex<T>;
        for (std::size_t ch = 0; ch < c_; ++ch) {
            const T dt = std::exp(log_dt_.w.v[ch]);
            const T* gkc = &gk[ch * L];
            for (std::size_t n = 0; n < n_; ++n) {
                const std::size_t i = ch * n_ + n;
                const C lam(lambda_re_.w.v[i], lambda_im_.w.v[i]);
                const C lam_bar = std::exp(dt * lam);
                const C bb(b_re_.w.v[i], b_im_.w.v[i]);
                const C cc(c_re_.w.v[i], c_im_.w.v[i]);
                const C resolvent = (lam_bar - C(1)) / lam;  // b_bar = resolvent * b
                const C dresolvent_dlam = (dt * lam_bar * lam - (lam_bar - C(1))) / (lam * lam);
                C grad_c(0), grad_b(0), grad_lam(0);
                T grad_logdt = 0;
                C p(1);  // lam_bar^t
                for (std::size_t t = 0; t < L; ++t) {
                    const T g = gkc[t];
                    if (g != T(0)) {
                        const C pb = p * resolvent;
                        grad_c += g * (pb * bb);
                        grad_b += g * (cc * pb);
                        const C f_lam =
                            cc * bb * (dt * static_cast<T>(t) * p * resolvent + p * dresolvent_dlam);
                        grad_lam += g * f_lam;
                        const C f_dt = cc * bb * p *
                                       (static_cast<T>(t) * (lam_bar - C(1)) + lam_bar);
                        grad_logdt += g * dt * f_dt.real();
                    }
                    p *= lam_bar;
                }
                c_re_.g.v[i] += grad_c.real();
                c_im_.g.v[i] += -grad_c.imag();
                b_re_.g.v[i] += grad_b.real();
                b_im_.g.v[i] += -grad_b.imag();
                lambda_re_.g.v[i] += grad_lam.real();
                lambda_im_.g.v[i] += -grad_lam.imag();
                log_dt_.g.v[ch] += grad_logdt;
            }
        }
    }

    std::size_t c_ = 0, n_ = 0;
    Param<T> lambda_re_, lambda_im_, b_re_, b_im_, c_re_, c_im_, log_dt_, d_;
    Act<T> in_cache_;
    std::vector<T> kernel_cache_;
    std::uint64_t unstable_warnings_ = 0;
};

template <typename T>
void reverse_time(const Act<T>& in, Act<T>& out) {
    out = Act<T>(in.n, in.c, in.l);
    for (std::size_t b = 0; b < in.n; ++b)
        for (std::size_t ch = 0; ch < in.c; ++ch) {
            const T* src = in.row(b, ch);
            T* dst = out.row(b, ch);
            for (std::size_t t = 0; t < in.l; ++t) dst[t] = src[in.l - 1 - t];
        }
}

/// Pre-norm residual block with a bidirectional S4 pair:
///   v   = layernorm(u)
///   f   = ssm_fwd(v)
///   g   = reverse(ssm_bwd(reverse(v)))
///   h   = dropout(gelu([f; g]))
///   out = u + conv1x1(h)            (2d -> d projection)
template <typename T>
class S4Block {
public:
    S4Block() = default;
    S4Block(const std::string& name, std::size_t d_model, std::size_t d_state, bool bidirectional,
            double dropout, DetRng& rng)
        : bidirectional_(bidirectional),
          norm_(name + ".norm", d_model),
          fwd_(name + ".ssm_fwd", d_model, d_state, rng),
          drop_(dropout, rng.u64()) {
        if (bidirectional_) bwd_ = S4Ssm<T>(name + ".ssm_bwd", d_model, d_state, rng);
        const std::size_t mix_in = bidirectional_ ? 2 * d_model : d_model;
        mix_ = Conv1d<T>(name + ".mix", mix_in, d_model, 1, 1, 0, rng);
    }

    void forward(const Act<T>& u, Act<T>& out, bool train) {
        u_cache_ = u;
        Act<T> v;
        norm_.forward(u, v);
        Act<T> f;
        fwd_.forward(v, f);
        Act<T> h;
        if (bidirectional_) {
            Act<T> vr, gr, g;
            reverse_time(v, vr);
            bwd_.forward(vr, gr);
            reverse_time(gr, g);
            h = Act<T>(u.n, 2 * u.c, u.l);
            for (std::size_t b = 0; b < u.n; ++b)
                for (std::size_t ch = 0; ch < u.c; ++ch) {
                    std::copy(f.row(b, ch), f.row(b, ch) + u.l, h.row(b, ch));
                    std::copy(g.row(b, ch), g.row(b, ch) + u.l, h.row(b, u.c + ch));
                }
        } else {
            h = std::move(f);
        }
        Act<T> a, ad, z;
        act_.forward(h, a);
        drop_.forward(a, ad, train);
        mix_.forward(ad, z);
        out = u;
        for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += z.v[i];
    }

    void backward(const Act<T>& gout, Act<T>& gin) {
        Act<T> gad, ga, gh;
        mix_.backward(gout, gad);
        drop_.backward(gad, ga);
        act_.backward(ga, gh);
        Act<T> gv;
        if (bidirectional_) {
            const std::size_t d = u_cache_.c;
            Act<T> gf(gh.n, d, gh.l), gg(gh.n, d, gh.l);
            for (std::size_t b = 0; b < gh.n; ++b)
                for (std::size_t ch = 0; ch < d; ++ch) {
                    std::copy(gh.row(b, ch), gh.row(b, ch) + gh.l, gf.row(b, ch));
                    std::copy(gh.row(b, d + ch), gh.row(b, d + ch) + gh.l, gg.row(b, ch));
                }
            Act<T> gv_f;
            fwd_.backward(gf, gv_f);
            Act<T> ggr, gvr, gv_b;
            reverse_time(gg, ggr);
            bwd_.backward(ggr, gvr);
            reverse_time(gvr, gv_b);
            gv = std::move(gv_f);
            for (std::size_t i = 0; i < gv.v.size(); ++i) gv.v[i] += gv_b.v[i];
        } else {
            fwd_.backward(gh, gv);
        }
        Act<T> gu_norm;
        norm_.backward(gv, gu_norm);
        gin = gout;
        for (std::size_t i = 0; i < gin.v.size(); ++i) gin.v[i] += gu_norm.v[i];
    }

    void params(std::vector<Param<T>*>& out) {
        norm_.params(out);
        fwd_.params(out);
        if (bidirectional_) bwd_.params(out);
        mix_.params(out);
    }

    S4Ssm<T>& forward_ssm() { return fwd_; }
    std::uint64_t unstable_pole_warnings() const {
        return fwd_.unstable_pole_warnings() + (bidirectional_ ? bwd_.unstable_pole_warnings() : 0);
    }

private:
    bool bidirectional_ = true;
    LayerNorm<T> norm_;
    S4Ssm<T> fwd_, bwd_;
    Gelu<T> act_;
    Dropout<T> drop_;
    Conv1d<T> mix_;
    Act<T> u_cache_;
};

}  // namespace ecgicd::models

#endif
