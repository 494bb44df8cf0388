#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "freak/error.hpp"
#include "freak/spectral.hpp"
#include "freak/tensor.hpp"

namespace freak {

// Reverse-mode tape. One tape per forward pass; ops append nodes in
// topological order and backward() replays them in reverse. Complex values
// are carried as (real, imaginary) node pairs, which keeps every stored
// tensor real and makes the FFT modulators differentiable end to end.
template <typename T>
class Tape {
public:
    using Ref = int;
    static constexpr Ref kNone = -1;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Ref constant(Tensor<T> v) { return emit(std::move(v), false, {}, nullptr); }

    Ref input(Tensor<T> v, bool needs_grad = true) {
        return emit(std::move(v), grad_enabled_ && needs_grad, {}, nullptr);
    }

    const Tensor<T>& value(Ref r) const { return nodes_[static_cast<size_t>(r)].value; }

    const Tensor<T>& grad(Ref r) const {
        const Node& n = nodes_[static_cast<size_t>(r)];
        if (n.grad.empty())
            throw ContractViolation("gradient not computed for this node");
        return n.grad;
    }

    void backward(Ref loss) {
        Node& ln = nodes_[static_cast<size_t>(loss)];
        if (ln.value.numel() != 1)
            throw ContractViolation("backward requires a scalar loss node");
        if (!grad_enabled_) throw ContractViolation("backward on a no-grad tape");
        grad_buf(loss).fill(T(1));
        for (int i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<size_t>(i)];
            if (n.needs_grad && n.backward && !n.grad.empty()) n.backward();
        }
    }

    size_t size() const { return nodes_.size(); }

    // ---- elementwise ----

    Ref add(Ref a, Ref b) {
        check_same_shape(a, b, "add");
        Tensor<T> out(value(a).shape());
        const Tensor<T>&va = value(a), &vb = value(b);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] + vb[i];
        return emit(std::move(out), needs(a) || needs(b), {a, b}, [this](Node& n) {
            const Tensor<T>& g = n.grad;
            if (needs(n.parents[0])) accumulate(n.parents[0], g, T(1));
            if (needs(n.parents[1])) accumulate(n.parents[1], g, T(1));
        });
    }

    Ref sub(Ref a, Ref b) {
        check_same_shape(a, b, "sub");
        Tensor<T> out(value(a).shape());
        const Tensor<T>&va = value(a), &vb = value(b);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] - vb[i];
        return emit(std::move(out), needs(a) || needs(b), {a, b}, [this](Node& n) {
            const Tensor<T>& g = n.grad;
            if (needs(n.parents[0])) accumulate(n.parents[0], g, T(1));
            if (needs(n.parents[1])) accumulate(n.parents[1], g, T(-1));
        });
    }

    Ref mul(Ref a, Ref b) {
        check_same_shape(a, b, "mul");
        Tensor<T> out(value(a).shape());
        const Tensor<T>&va = value(a), &vb = value(b);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * vb[i];
        return emit(std::move(out), needs(a) || needs(b), {a, b}, [this](Node& n) {
            const Tensor<T>& g = n.grad;
            const Tensor<T>& va = value(n.parents[0]);
            const Tensor<T>& vb = value(n.parents[1]);
            if (needs(n.parents[0])) {
                Tensor<T>& ga = grad_buf(n.parents[0]);
                for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * vb[i];
            }
            if (needs(n.parents[1])) {
                Tensor<T>& gb = grad_buf(n.parents[1]);
                for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * va[i];
            }
        });
    }

    Ref scale(Ref a, T s) {
        Tensor<T> out(value(a).shape());
        const Tensor<T>& va = value(a);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * s;
        return emit(std::move(out), needs(a), {a}, [this, s](Node& n) {
            if (!needs(n.parents[0])) return;
            accumulate(n.parents[0], n.grad, s);
        });
    }

    Ref abs(Ref a) {
        Tensor<T> out(value(a).shape());
        const Tensor<T>& va = value(a);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(va[i]);
        return emit(std::move(out), needs(a), {a}, [this](Node& n) {
            if (!needs(n.parents[0])) return;
            const Tensor<T>& g = n.grad;
            const Tensor<T>& va = value(n.parents[0]);
            Tensor<T>& ga = grad_buf(n.parents[0]);
            for (int64_t i = 0; i < g.numel(); ++i) {
                if (va[i] > T(0)) ga[i] += g[i];
                else if (va[i] < T(0)) ga[i] -= g[i];
            }
        });
    }

    Ref sigmoid(Ref a) {
        Tensor<T> out(value(a).shape());
        const Tensor<T>& va = value(a);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = sigmoid_scalar(va[i]);
        return emit(std::move(out), needs(a), {a}, [this](Node& n) {
            if (!needs(n.parents[0])) return;
            const Tensor<T>& g = n.grad;
            const Tensor<T>& y = n.value;
            Tensor<T>& ga = grad_buf(n.parents[0]);
            for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
        });
    }

    // x * sigmoid(x); smooth, so finite-difference checks stay tight.
    Ref silu(Ref a) {
        Tensor<T> out(value(a).shape());
        const Tensor<T>& va = value(a);
        for (int64_t i = 0; i < out.numel(); ++i) out[i] = va[i] * sigmoid_scalar(va[i]);
        return emit(std::move(out), needs(a), {a}, [this](Node& n) {
            if (!needs(n.parents[0])) return;
            const Tensor<T>& g = n.grad;
            const Tensor<T>& x = value(n.parents[0]);
            Tensor<T>& ga = grad_buf(n.parents[0]);
            for (int64_t i = 0; i < g.numel(); ++i) {
                const T s = sigmoid_scalar(x[i]);
                ga[i] += g[i] * s * (T(1) + x[i] * (T(1) - s));
            }
        });
    }

    Ref mean_all(Ref a) {
        const Tensor<T>& va = value(a);
        double acc = 0.0;
        for (int64_t i = 0; i < va.numel(); ++i) acc += static_cast<double>(va[i]);
        Tensor<T> out({1});
        out[0] = static_cast<T>(acc / static_cast<double>(va.numel()));
        return emit(std::move(out), needs(a), {a}, [this](Node& n) {
            if (!needs(n.parents[0])) return;
            Tensor<T>& ga = grad_buf(n.parents[0]);
            const T s = n.grad[0] / static_cast<T>(ga.numel());
            for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += s;
        });
    }

    // ---- shape ops ([N,C,H,W]) ----

    Ref upsample2x(Ref a) {
        const Tensor<T>& x = value(a);
        check_rank4(a, "upsample2x");
        const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        Tensor<T> out({N, C, 2 * H, 2 * W});
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c)
                for (int h = 0; h < H; ++h)
                    for (int w = 0; w < W; ++w) {
                        const T v = x.at(n, c, h, w);
                        out.at(n, c, 2 * h, 2 * w) = v;
                        out.at(n, c, 2 * h, 2 * w + 1) = v;
                        out.at(n, c, 2 * h + 1, 2 * w) = v;
                        out.at(n, c, 2 * h + 1, 2 * w + 1) = v;
                    }
        return emit(std::move(out), needs(a), {a}, [this](Node& n) {
            if (!needs(n.parents[0])) return;
            Tensor<T>& ga = grad_buf(n.parents[0]);
            const Tensor<T>& g = n.grad;
            const int N = ga.dim(0), C = ga.dim(1), H = ga.dim(2), W = ga.dim(3);
            for (int nn = 0; nn < N; ++nn)
                for (int c = 0; c < C; ++c)
                    for (int h = 0; h < H; ++h)
                        for (int w = 0; w < W; ++w)
                            ga.at(nn, c, h, w) += g.at(nn, c, 2 * h, 2 * w) +
                                                  g.at(nn, c, 2 * h, 2 * w + 1) +
                                                  g.at(nn, c, 2 * h + 1, 2 * w) +
                                                  g.at(nn, c, 2 * h + 1, 2 * w + 1);
        });
    }

    Ref concat_channels(Ref a, Ref b) {
        const Tensor<T>&va = value(a), &vb = value(b);
        check_rank4(a, "concat_channels");
        check_rank4(b, "concat_channels");
        if (va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2) || va.dim(3) != vb.dim(3))
            throw ContractViolation("concat_channels: incompatible shapes");
        const int N = va.dim(0), Ca = va.dim(1), Cb = vb.dim(1), H = va.dim(2), W = va.dim(3);
        Tensor<T> out({N, Ca + Cb, H, W});
        const int64_t plane = static_cast<int64_t>(H) * W;
        for (int n = 0; n < N; ++n) {
            std::copy(va.data() + n * Ca * plane, va.data() + (n + 1) * Ca * plane,
                      out.data() + static_cast<int64_t>(n) * (Ca + Cb) * plane);
            std::copy(vb.data() + n * Cb * plane, vb.data() + (n + 1) * Cb * plane,
                      out.data() + (static_cast<int64_t>(n) * (Ca + Cb) + Ca) * plane);
        }
        return emit(std::move(out), needs(a) || needs(b), {a, b}, [this, Ca, Cb, plane](Node& n) {
            const Tensor<T>& g = n.grad;
            const int N = g.dim(0);
            if (needs(n.parents[0])) {
                Tensor<T>& ga = grad_buf(n.parents[0]);
                for (int nn = 0; nn < N; ++nn) {
                    const T* src = g.data() + static_cast<int64_t>(nn) * (Ca + Cb) * plane;
                    T* dst = ga.data() + static_cast<int64_t>(nn) * Ca * plane;
                    for (int64_t i = 0; i < Ca * plane; ++i) dst[i] += src[i];
                }
            }
            if (needs(n.parents[1])) {
                Tensor<T>& gb = grad_buf(n.parents[1]);
                for (int nn = 0; nn < N; ++nn) {
                    const T* src = g.data() + (static_cast<int64_t>(nn) * (Ca + Cb) + Ca) * plane;
                    T* dst = gb.data() + static_cast<int64_t>(nn) * Cb * plane;
                    for (int64_t i = 0; i < Cb * plane; ++i) dst[i] += src[i];
                }
            }
        });
    }

    // ---- convolution ----

    // x [N,Ci,H,W], w [Co,Ci/groups,k,k], optional bias [Co].
    Ref conv2d(Ref x, Ref w, Ref b, int stride, int pad, int groups = 1) {
        const Tensor<T>& xv = value(x);
        const Tensor<T>& wv = value(w);
        check_rank4(x, "conv2d input");
        if (wv.rank() != 4) throw ContractViolation("conv2d: weight must be rank 4");
        const int N = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
        const int Co = wv.dim(0), Cg = wv.dim(1), K = wv.dim(2);
        if (wv.dim(3) != K) throw ContractViolation("conv2d: non-square kernel");
        if (Ci % groups != 0 || Co % groups != 0)
            throw ContractViolation("conv2d: channels not divisible by groups");
        if (Cg != Ci / groups) throw ContractViolation("conv2d: weight channel mismatch");
        if (b != kNone && value(b).numel() != Co)
            throw ContractViolation("conv2d: bias size mismatch");
        const int Ho = (H + 2 * pad - K) / stride + 1;
        const int Wo = (W + 2 * pad - K) / stride + 1;
        if (Ho < 1 || Wo < 1) throw ContractViolation("conv2d: kernel exceeds padded input");

        Tensor<T> out({N, Co, Ho, Wo});
        conv_forward(xv, wv, b == kNone ? nullptr : &value(b), out, stride, pad, groups);
        std::vector<Ref> parents = {x, w};
        if (b != kNone) parents.push_back(b);
        const bool ng = needs(x) || needs(w) || (b != kNone && needs(b));
        return emit(std::move(out), ng, std::move(parents), [this, stride, pad, groups](Node& n) {
            const Ref x = n.parents[0], w = n.parents[1];
            const Ref b = n.parents.size() > 2 ? n.parents[2] : kNone;
            conv_backward(value(x), value(w), n.grad,
                          needs(x) ? &grad_buf(x) : nullptr,
                          needs(w) ? &grad_buf(w) : nullptr,
                          (b != kNone && needs(b)) ? &grad_buf(b) : nullptr,
                          stride, pad, groups);
        });
    }

    // Per-sample, per-channel plane normalization with learned scale/shift.
    Ref instance_norm(Ref x, Ref gamma, Ref beta, T eps = T(1e-5)) {
        const Tensor<T>& xv = value(x);
        check_rank4(x, "instance_norm");
        const int N = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
        if (value(gamma).numel() != C || value(beta).numel() != C)
            throw ContractViolation("instance_norm: parameter size mismatch");
        const int64_t plane = static_cast<int64_t>(H) * W;
        Tensor<T> out(xv.shape());
        Tensor<T> inv_std({N, C, 1, 1});
        Tensor<T> mean({N, C, 1, 1});
        const Tensor<T>& gv = value(gamma);
        const Tensor<T>& bv = value(beta);
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const T* p = xv.data() + (static_cast<int64_t>(n) * C + c) * plane;
                double m = 0.0;
                for (int64_t i = 0; i < plane; ++i) m += static_cast<double>(p[i]);
                m /= static_cast<double>(plane);
                double var = 0.0;
                for (int64_t i = 0; i < plane; ++i) {
                    const double d = static_cast<double>(p[i]) - m;
                    var += d * d;
                }
                var /= static_cast<double>(plane);
                const T inv = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
                mean.at(n, c, 0, 0) = static_cast<T>(m);
                inv_std.at(n, c, 0, 0) = inv;
                T* q = out.data() + (static_cast<int64_t>(n) * C + c) * plane;
                const T g = gv[c], bb = bv[c], mm = static_cast<T>(m);
                for (int64_t i = 0; i < plane; ++i) q[i] = (p[i] - mm) * inv * g + bb;
            }
        const bool ng = needs(x) || needs(gamma) || needs(beta);
        return emit(std::move(out), ng, {x, gamma, beta},
                    [this, mean = std::move(mean), inv_std = std::move(inv_std), plane](Node& n) {
            const Ref x = n.parents[0], gamma = n.parents[1], beta = n.parents[2];
            const Tensor<T>& xv = value(x);
            const Tensor<T>& gv = value(gamma);
            const Tensor<T>& g = n.grad;
            const int N = xv.dim(0), C = xv.dim(1);
            for (int nn = 0; nn < N; ++nn)
                for (int c = 0; c < C; ++c) {
                    const int64_t off = (static_cast<int64_t>(nn) * C + c) * plane;
                    const T* xp = xv.data() + off;
                    const T* gp = g.data() + off;
                    const T mm = mean.at(nn, c, 0, 0);
                    const T inv = inv_std.at(nn, c, 0, 0);
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (int64_t i = 0; i < plane; ++i) {
                        const double xh = static_cast<double>((xp[i] - mm) * inv);
                        sum_g += static_cast<double>(gp[i]);
                        sum_gx += static_cast<double>(gp[i]) * xh;
                    }
                    if (needs(beta)) grad_buf(beta)[c] += static_cast<T>(sum_g);
                    if (needs(gamma)) grad_buf(gamma)[c] += static_cast<T>(sum_gx);
                    if (needs(x)) {
                        Tensor<T>& gx = grad_buf(x);
                        T* gxp = gx.data() + off;
                        const T mg = static_cast<T>(sum_g / static_cast<double>(plane));
                        const T mgx = static_cast<T>(sum_gx / static_cast<double>(plane));
                        const T scale = gv[c] * inv;
                        for (int64_t i = 0; i < plane; ++i) {
                            const T xh = (xp[i] - mm) * inv;
                            gxp[i] += scale * (gp[i] - mg - xh * mgx);
                        }
                    }
                }
        });
    }

    // ---- frequency domain ----

    // Unnormalized 2-D DFT over the trailing two dims; returns (re, im).
    std::pair<Ref, Ref> fft2(Ref x) {
        const Tensor<T>& xv = value(x);
        if (xv.rank() < 2) throw ContractViolation("fft2: rank must be >= 2");
        const int H = xv.dim(xv.rank() - 2), W = xv.dim(xv.rank() - 1);
        const int64_t planes = xv.numel() / (static_cast<int64_t>(H) * W);
        std::vector<std::complex<T>> spec(static_cast<size_t>(xv.numel()));
        spectral::detail::fft2_planes(xv.data(), spec.data(), planes, H, W);
        Tensor<T> re(xv.shape()), im(xv.shape());
        for (int64_t i = 0; i < xv.numel(); ++i) {
            re[i] = spec[static_cast<size_t>(i)].real();
            im[i] = spec[static_cast<size_t>(i)].imag();
        }
        // adjoint of the unnormalized forward DFT is the unnormalized inverse
        auto back = [this, planes, H, W](Node& n, bool imag_part) {
            if (!needs(n.parents[0])) return;
            const Tensor<T>& g = n.grad;
            std::vector<std::complex<T>> spec(static_cast<size_t>(g.numel()));
            for (int64_t i = 0; i < g.numel(); ++i)
                spec[static_cast<size_t>(i)] = imag_part
                    ? std::complex<T>(T(0), g[i])
                    : std::complex<T>(g[i], T(0));
            Tensor<T> dx(g.shape());
            spectral::detail::ifft2_real_planes(spec.data(), dx.data(), planes, H, W);
            accumulate(n.parents[0], dx, static_cast<T>(static_cast<int64_t>(H) * W));
        };
        Ref re_ref = emit(std::move(re), needs(x), {x},
                          [back](Node& n) { back(n, false); });
        Ref im_ref = emit(std::move(im), needs(x), {x},
                          [back](Node& n) { back(n, true); });
        return {re_ref, im_ref};
    }

    // Inverse 2-D DFT (1/(H*W)) of a (re, im) pair; returns the real part.
    Ref ifft2_real(Ref re, Ref im) {
        check_same_shape(re, im, "ifft2_real");
        const Tensor<T>& rv = value(re);
        if (rv.rank() < 2) throw ContractViolation("ifft2_real: rank must be >= 2");
        const int H = rv.dim(rv.rank() - 2), W = rv.dim(rv.rank() - 1);
        const int64_t planes = rv.numel() / (static_cast<int64_t>(H) * W);
        const Tensor<T>& iv = value(im);
        std::vector<std::complex<T>> spec(static_cast<size_t>(rv.numel()));
        for (int64_t i = 0; i < rv.numel(); ++i)
            spec[static_cast<size_t>(i)] = std::complex<T>(rv[i], iv[i]);
        Tensor<T> out(rv.shape());
        spectral::detail::ifft2_real_planes(spec.data(), out.data(), planes, H, W);
        return emit(std::move(out), needs(re) || needs(im), {re, im},
                    [this, planes, H, W](Node& n) {
            const Tensor<T>& g = n.grad;
            std::vector<std::complex<T>> gs(static_cast<size_t>(g.numel()));
            spectral::detail::fft2_planes(g.data(), gs.data(), planes, H, W);
            const T scale = T(1) / static_cast<T>(static_cast<int64_t>(H) * W);
            if (needs(n.parents[0])) {
                Tensor<T>& gr = grad_buf(n.parents[0]);
                for (int64_t i = 0; i < g.numel(); ++i)
                    gr[i] += gs[static_cast<size_t>(i)].real() * scale;
            }
            if (needs(n.parents[1])) {
                Tensor<T>& gi = grad_buf(n.parents[1]);
                for (int64_t i = 0; i < g.numel(); ++i)
                    gi[i] += gs[static_cast<size_t>(i)].imag() * scale;
            }
        });
    }

    // sqrt(re^2 + im^2) with zero subgradient at the origin.
    Ref complex_abs(Ref re, Ref im) {
        check_same_shape(re, im, "complex_abs");
        const Tensor<T>&rv = value(re), &iv = value(im);
        Tensor<T> out(rv.shape());
        for (int64_t i = 0; i < out.numel(); ++i)
            out[i] = static_cast<T>(std::hypot(static_cast<double>(rv[i]),
                                               static_cast<double>(iv[i])));
        return emit(std::move(out), needs(re) || needs(im), {re, im}, [this](Node& n) {
            const Tensor<T>& g = n.grad;
            const Tensor<T>& y = n.value;
            const Tensor<T>& rv = value(n.parents[0]);
            const Tensor<T>& iv = value(n.parents[1]);
            if (needs(n.parents[0])) {
                Tensor<T>& gr = grad_buf(n.parents[0]);
                for (int64_t i = 0; i < g.numel(); ++i)
                    if (y[i] > T(0)) gr[i] += g[i] * rv[i] / y[i];
            }
            if (needs(n.parents[1])) {
                Tensor<T>& gi = grad_buf(n.parents[1]);
                for (int64_t i = 0; i < g.numel(); ++i)
                    if (y[i] > T(0)) gi[i] += g[i] * iv[i] / y[i];
            }
        });
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::vector<Ref> parents;
        std::function<void()> backward;
        bool needs_grad = false;
    };

    static T sigmoid_scalar(T x) {
        return x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                         : T(1) - T(1) / (T(1) + std::exp(x));
    }

    bool needs(Ref r) const { return nodes_[static_cast<size_t>(r)].needs_grad; }

    Tensor<T>& grad_buf(Ref r) {
        Node& n = nodes_[static_cast<size_t>(r)];
        if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
        return n.grad;
    }

    void accumulate(Ref r, const Tensor<T>& g, T s) {
        Tensor<T>& dst = grad_buf(r);
        for (int64_t i = 0; i < g.numel(); ++i) dst[i] += g[i] * s;
    }

    void check_same_shape(Ref a, Ref b, const char* op) const {
        if (!value(a).same_shape(value(b)))
            throw ContractViolation(std::string(op) + ": shape mismatch");
    }

    void check_rank4(Ref a, const char* op) const {
        if (value(a).rank() != 4)
            throw ContractViolation(std::string(op) + ": expects [N,C,H,W]");
    }

    using BackFn = std::function<void(Node&)>;

    Ref emit(Tensor<T> v, bool needs_grad, std::vector<Ref> parents, BackFn back) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = grad_enabled_ && needs_grad;
        n.parents = std::move(parents);
        nodes_.push_back(std::move(n));
        const Ref idx = static_cast<Ref>(nodes_.size() - 1);
        if (nodes_.back().needs_grad && back) {
            nodes_.back().backward = [this, idx, f = std::move(back)]() {
                f(nodes_[static_cast<size_t>(idx)]);
            };
        }
        return idx;
    }

    void conv_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
                      Tensor<T>& out, int stride, int pad, int groups) {
        const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
        const int Co = w.dim(0), Cg = w.dim(1), K = w.dim(2);
        const int Ho = out.dim(2), Wo = out.dim(3);
        const int co_per_g = Co / groups;
        for (int n = 0; n < N; ++n)
            for (int oc = 0; oc < Co; ++oc) {
                T* out_plane = out.data() + ((static_cast<int64_t>(n) * Co + oc) * Ho) * Wo;
                const T bv = bias ? (*bias)[oc] : T(0);
                std::fill(out_plane, out_plane + static_cast<int64_t>(Ho) * Wo, bv);
                const int g = oc / co_per_g;
                for (int icg = 0; icg < Cg; ++icg) {
                    const int ic = g * Cg + icg;
                    const T* in_base = x.data() + (static_cast<int64_t>(n) * Ci + ic) *
                                                      static_cast<int64_t>(H) * W;
                    const T* w_base = w.data() + (static_cast<int64_t>(oc) * Cg + icg) *
                                                     static_cast<int64_t>(K) * K;
                    for (int kh = 0; kh < K; ++kh)
                        for (int kw = 0; kw < K; ++kw) {
                            const T wv = w_base[kh * K + kw];
                            if (wv == T(0)) continue;
                            for (int oh = 0; oh < Ho; ++oh) {
                                const int ih = oh * stride - pad + kh;
                                if (ih < 0 || ih >= H) continue;
                                const T* in_row = in_base + static_cast<int64_t>(ih) * W;
                                T* out_row = out_plane + static_cast<int64_t>(oh) * Wo;
                                int lo = 0, hi = Wo;
                                clamp_span(pad, kw, stride, W, Wo, lo, hi);
                                if (stride == 1) {
                                    const T* ir = in_row + (kw - pad);
                                    for (int ow = lo; ow < hi; ++ow) out_row[ow] += wv * ir[ow];
                                } else {
                                    for (int ow = lo; ow < hi; ++ow)
                                        out_row[ow] += wv * in_row[ow * stride + kw - pad];
                                }
                            }
                        }
                }
            }
    }

    void conv_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gout,
                       Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb,
                       int stride, int pad, int groups) {
        const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
        const int Co = w.dim(0), Cg = w.dim(1), K = w.dim(2);
        const int Ho = gout.dim(2), Wo = gout.dim(3);
        const int co_per_g = Co / groups;
        for (int n = 0; n < N; ++n)
            for (int oc = 0; oc < Co; ++oc) {
                const T* g_plane = gout.data() + (static_cast<int64_t>(n) * Co + oc) *
                                                     static_cast<int64_t>(Ho) * Wo;
                if (gb) {
                    double acc = 0.0;
                    for (int64_t i = 0; i < static_cast<int64_t>(Ho) * Wo; ++i)
                        acc += static_cast<double>(g_plane[i]);
                    (*gb)[oc] += static_cast<T>(acc);
                }
                const int g = oc / co_per_g;
                for (int icg = 0; icg < Cg; ++icg) {
                    const int ic = g * Cg + icg;
                    const T* in_base = x.data() + (static_cast<int64_t>(n) * Ci + ic) *
                                                      static_cast<int64_t>(H) * W;
                    const T* w_base = w.data() + (static_cast<int64_t>(oc) * Cg + icg) *
                                                     static_cast<int64_t>(K) * K;
                    T* gin_base = gx ? gx->data() + (static_cast<int64_t>(n) * Ci + ic) *
                                                        static_cast<int64_t>(H) * W
                                     : nullptr;
                    T* gw_base = gw ? gw->data() + (static_cast<int64_t>(oc) * Cg + icg) *
                                                       static_cast<int64_t>(K) * K
                                    : nullptr;
                    for (int kh = 0; kh < K; ++kh)
                        for (int kw = 0; kw < K; ++kw) {
                            const T wv = w_base[kh * K + kw];
                            double wacc = 0.0;
                            for (int oh = 0; oh < Ho; ++oh) {
                                const int ih = oh * stride - pad + kh;
                                if (ih < 0 || ih >= H) continue;
                                const T* g_row = g_plane + static_cast<int64_t>(oh) * Wo;
                                const T* in_row = in_base + static_cast<int64_t>(ih) * W;
                                int lo = 0, hi = Wo;
                                clamp_span(pad, kw, stride, W, Wo, lo, hi);
                                if (gin_base) {
                                    T* gin_row = gin_base + static_cast<int64_t>(ih) * W;
                                    if (stride == 1) {
                                        T* gr = gin_row + (kw - pad);
                                        for (int ow = lo; ow < hi; ++ow) gr[ow] += wv * g_row[ow];
                                    } else {
                                        for (int ow = lo; ow < hi; ++ow)
                                            gin_row[ow * stride + kw - pad] += wv * g_row[ow];
                                    }
                                }
                                if (gw_base) {
                                    if (stride == 1) {
                                        const T* ir = in_row + (kw - pad);
                                        for (int ow = lo; ow < hi; ++ow)
                                            wacc += static_cast<double>(g_row[ow]) *
                                                    static_cast<double>(ir[ow]);
                                    } else {
                                        for (int ow = lo; ow < hi; ++ow)
                                            wacc += static_cast<double>(g_row[ow]) *
                                                    static_cast<double>(in_row[ow * stride + kw - pad]);
                                    }
                                }
                            }
                            if (gw_base) gw_base[kh * K + kw] += static_cast<T>(wacc);
                        }
                }
            }
    }

    // Output-column range with in-bounds input accesses.
    static void clamp_span(int pad, int kw, int stride, int W, int Wo, int& lo, int& hi) {
        const int shift = kw - pad;  // iw = ow*stride + shift
        lo = 0;
        if (shift < 0) lo = (-shift + stride - 1) / stride;
        hi = Wo;
        const int max_iw = W - 1 - shift;
        if (max_iw < 0) { hi = lo; return; }
        const int hi_cand = max_iw / stride + 1;
        if (hi_cand < hi) hi = hi_cand;
        if (lo > hi) lo = hi;
    }

    bool grad_enabled_;
    std::vector<Node> nodes_;
};

}  // namespace freak
