#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

#include "fringeforge/autodiff.hpp"
#include "fringeforge/tensor.hpp"

namespace fringeforge {

namespace detail {

inline Tape* op_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tape = nullptr;
    for (const Tensor* t : ts) {
        if (!t->tracked()) continue;
        if (tape == nullptr)
            tape = t->tape();
        else if (tape != t->tape())
            throw std::invalid_argument("operands live on different tapes");
    }
    return tape;
}

inline void track(Tensor& out, Tape* tape, Tape::BackwardFn fn) {
    if (tape == nullptr) return;
    int id = tape->add_node(out.shape(), std::move(fn));
    out.set_tracking(tape, id);
}

}  // namespace detail

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    double* o = out.mut();
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) o[i] = pa[i] + pb[i];

    Tape* tape = detail::op_tape({&a, &b});
    const int na = a.node(), nb = b.node(), no = static_cast<int>(tape ? tape->size() : 0);
    detail::track(out, tape, [na, nb, no](Tape& t) {
        const Tensor& g = t.grad_buffer(no);
        detail::axpy_into(t, na, g);
        detail::axpy_into(t, nb, g);
    });
    return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape());
    double* o = out.mut();
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) o[i] = pa[i] - pb[i];

    Tape* tape = detail::op_tape({&a, &b});
    const int na = a.node(), nb = b.node(), no = static_cast<int>(tape ? tape->size() : 0);
    detail::track(out, tape, [na, nb, no](Tape& t) {
        const Tensor& g = t.grad_buffer(no);
        detail::axpy_into(t, na, g);
        detail::axpy_into(t, nb, g, -1.0);
    });
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    double* o = out.mut();
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) o[i] = pa[i] * pb[i];

    Tape* tape = detail::op_tape({&a, &b});
    const int na = a.node(), nb = b.node(), no = static_cast<int>(tape ? tape->size() : 0);
    Tensor av = a.detached(), bv = b.detached();
    detail::track(out, tape, [na, nb, no, av, bv](Tape& t) {
        const Tensor& g = t.grad_buffer(no);
        const double* gd = g.data();
        if (na >= 0) {
            double* ga = t.grad_buffer(na).mut();
            const double* pb2 = bv.data();
            for (std::int64_t i = 0; i < g.numel(); ++i) ga[i] += gd[i] * pb2[i];
        }
        if (nb >= 0) {
            double* gb = t.grad_buffer(nb).mut();
            const double* pa2 = av.data();
            for (std::int64_t i = 0; i < g.numel(); ++i) gb[i] += gd[i] * pa2[i];
        }
    });
    return out;
}

/// y = scale*x + shift, elementwise with scalar constants.
inline Tensor affine(const Tensor& a, double scale, double shift) {
    Tensor out = Tensor::zeros(a.shape());
    double* o = out.mut();
    const double* pa = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) o[i] = scale * pa[i] + shift;

    Tape* tape = detail::op_tape({&a});
    const int na = a.node(), no = static_cast<int>(tape ? tape->size() : 0);
    detail::track(out, tape, [na, no, scale](Tape& t) { detail::axpy_into(t, na, t.grad_buffer(no), scale); });
    return out;
}

inline Tensor scale(const Tensor& a, double factor) { return affine(a, factor, 0.0); }
inline Tensor neg(const Tensor& a) { return affine(a, -1.0, 0.0); }

/// Clamp with zero subgradient outside the open interval and at the kinks.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    Tensor out = Tensor::zeros(a.shape());
    double* o = out.mut();
    const double* pa = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) o[i] = std::min(std::max(pa[i], lo), hi);

    Tape* tape = detail::op_tape({&a});
    const int na = a.node(), no = static_cast<int>(tape ? tape->size() : 0);
    Tensor av = a.detached();
    detail::track(out, tape, [na, no, av, lo, hi](Tape& t) {
        if (na < 0) return;
        const double* gd = t.grad_buffer(no).data();
        double* ga = t.grad_buffer(na).mut();
        const double* pa2 = av.data();
        for (std::int64_t i = 0; i < av.numel(); ++i)
            if (pa2[i] > lo && pa2[i] < hi) ga[i] += gd[i];
    });
    return out;
}

inline Tensor relu6(const Tensor& a) { return clamp(a, 0.0, 6.0); }

inline Tensor log(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    double* o = out.mut();
    const double* pa = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        if (pa[i] <= 0.0) throw std::domain_error("log: non-positive input " + std::to_string(pa[i]));
        o[i] = std::log(pa[i]);
    }

    Tape* tape = detail::op_tape({&a});
    const int na = a.node(), no = static_cast<int>(tape ? tape->size() : 0);
    Tensor av = a.detached();
    detail::track(out, tape, [na, no, av](Tape& t) {
        if (na < 0) return;
        const double* gd = t.grad_buffer(no).data();
        double* ga = t.grad_buffer(na).mut();
        const double* pa2 = av.data();
        for (std::int64_t i = 0; i < av.numel(); ++i) ga[i] += gd[i] / pa2[i];
    });
    return out;
}

inline Tensor sigmoid(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    double* o = out.mut();
    const double* pa = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) o[i] = sigmoid(pa[i]);

    Tape* tape = detail::op_tape({&a});
    const int na = a.node(), no = static_cast<int>(tape ? tape->size() : 0);
    Tensor ov = out.detached();
    detail::track(out, tape, [na, no, ov](Tape& t) {
        if (na < 0) return;
        const double* gd = t.grad_buffer(no).data();
        double* ga = t.grad_buffer(na).mut();
        const double* s = ov.data();
        for (std::int64_t i = 0; i < ov.numel(); ++i) ga[i] += gd[i] * s[i] * (1.0 - s[i]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
    double acc = 0.0;
    const double* pa = a.data();
    for (std::int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
    Tensor out = Tensor::scalar(acc);

    Tape* tape = detail::op_tape({&a});
    const int na = a.node(), no = static_cast<int>(tape ? tape->size() : 0);
    const Shape ash = a.shape();
    detail::track(out, tape, [na, no, ash](Tape& t) {
        if (na < 0) return;
        const double g = t.grad_buffer(no).data()[0];
        double* ga = t.grad_buffer(na).mut();
        for (std::int64_t i = 0; i < ash.numel(); ++i) ga[i] += g;
    });
    return out;
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

/// Mean squared error, built from elementwise ops.
inline Tensor mse(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mse");
    Tensor d = sub(a, b);
    return mean(mul(d, d));
}

// ---------------------------------------------------------------------------
// Spatial operators
// ---------------------------------------------------------------------------

/// 3x3 convolution with zero padding 1 and stride 1 or 2.
/// input [N,Ci,H,W], kernel [Co,Ci,3,3], bias [1,Co,1,1] -> [N,Co,ceil(H/s),ceil(W/s)].
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride) {
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
    const Shape& is = input.shape();
    const Shape& ks = kernel.shape();
    if (ks.h() != 3 || ks.w() != 3)
        throw std::invalid_argument("conv2d: kernel spatial axes must be 3x3, got " + ks.str());
    if (is.c() != ks.c())
        throw std::invalid_argument("conv2d: input channel axis " + std::to_string(is.c()) +
                                    " does not match kernel input axis " + std::to_string(ks.c()));
    if (!(bias.shape() == Shape{1, ks.n(), 1, 1}))
        throw std::invalid_argument("conv2d: bias shape " + bias.shape().str() + " must be [1," +
                                    std::to_string(ks.n()) + ",1,1]");

    const std::int64_t N = is.n(), Ci = is.c(), H = is.h(), W = is.w(), Co = ks.n();
    const std::int64_t OH = (H - 1) / stride + 1, OW = (W - 1) / stride + 1;
    Tensor out = Tensor::zeros(Shape{N, Co, OH, OW});
    double* od = out.mut();
    const double* id = input.data();
    const double* kd = kernel.data();
    const double* bd = bias.data();

    for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t co = 0; co < Co; ++co) {
            double* oplane = od + (n * Co + co) * OH * OW;
            const double b = bd[co];
            for (std::int64_t i = 0; i < OH * OW; ++i) oplane[i] = b;
            for (std::int64_t ci = 0; ci < Ci; ++ci) {
                const double* iplane = id + (n * Ci + ci) * H * W;
                const double* kk = kd + (co * Ci + ci) * 9;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const double w = kk[ky * 3 + kx];
                        // oy*stride + ky - 1 must land in [0, H)
                        const std::int64_t oy_lo = (ky == 0) ? 1 : 0;
                        const std::int64_t oy_hi = std::min(OH - 1, H >= ky ? (H - ky) / stride : -1);
                        const std::int64_t ox_lo = (kx == 0) ? 1 : 0;
                        const std::int64_t ox_hi = std::min(OW - 1, W >= kx ? (W - kx) / stride : -1);
                        for (std::int64_t oy = oy_lo; oy <= oy_hi; ++oy) {
                            const std::int64_t iy = oy * stride + ky - 1;
                            const double* irow = iplane + iy * W + kx - 1;
                            double* orow = oplane + oy * OW;
                            for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += w * irow[ox * stride];
                        }
                    }
                }
            }
        }
    }

    Tape* tape = detail::op_tape({&input, &kernel, &bias});
    const int ni = input.node(), nk = kernel.node(), nb = bias.node();
    const int no = static_cast<int>(tape ? tape->size() : 0);
    Tensor iv = input.detached(), kv = kernel.detached();
    detail::track(out, tape, [=](Tape& t) {
        const Tensor& g = t.grad_buffer(no);
        const double* gd = g.data();
        double* gi = (ni >= 0) ? t.grad_buffer(ni).mut() : nullptr;
        double* gk = (nk >= 0) ? t.grad_buffer(nk).mut() : nullptr;
        double* gb = (nb >= 0) ? t.grad_buffer(nb).mut() : nullptr;
        const double* id2 = iv.data();
        const double* kd2 = kv.data();

        for (std::int64_t n = 0; n < N; ++n) {
            for (std::int64_t co = 0; co < Co; ++co) {
                const double* gplane = gd + (n * Co + co) * OH * OW;
                if (gb) {
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < OH * OW; ++i) acc += gplane[i];
                    gb[co] += acc;
                }
                if (!gi && !gk) continue;
                for (std::int64_t ci = 0; ci < Ci; ++ci) {
                    const double* iplane = id2 + (n * Ci + ci) * H * W;
                    const double* kk = kd2 + (co * Ci + ci) * 9;
                    double* giplane = gi ? gi + (n * Ci + ci) * H * W : nullptr;
                    double* gkk = gk ? gk + (co * Ci + ci) * 9 : nullptr;
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            const std::int64_t oy_lo = (ky == 0) ? 1 : 0;
                            const std::int64_t oy_hi = std::min(OH - 1, H >= ky ? (H - ky) / stride : -1);
                            const std::int64_t ox_lo = (kx == 0) ? 1 : 0;
                            const std::int64_t ox_hi = std::min(OW - 1, W >= kx ? (W - kx) / stride : -1);
                            const double w = kk[ky * 3 + kx];
                            double kacc = 0.0;
                            for (std::int64_t oy = oy_lo; oy <= oy_hi; ++oy) {
                                const std::int64_t iy = oy * stride + ky - 1;
                                const double* grow = gplane + oy * OW;
                                const std::int64_t base = iy * W + kx - 1;
                                if (gkk) {
                                    const double* irow = iplane + base;
                                    for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox)
                                        kacc += grow[ox] * irow[ox * stride];
                                }
                                if (giplane) {
                                    double* girow = giplane + base;
                                    for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox)
                                        girow[ox * stride] += w * grow[ox];
                                }
                            }
                            if (gkk) gkk[ky * 3 + kx] += kacc;
                        }
                    }
                }
            }
        }
    });
    return out;
}

/// Running statistics for batch normalization (inference path).
struct BatchNormStats {
    Tensor running_mean;  // [1,C,1,1]
    Tensor running_var;   // [1,C,1,1]
    double momentum = 0.1;

    explicit BatchNormStats(std::int64_t channels = 1, double m = 0.1)
        : running_mean(Tensor::zeros(Shape{1, channels, 1, 1})),
          running_var(Tensor::ones(Shape{1, channels, 1, 1})),
          momentum(m) {}
};

/// Per-channel batch normalization. Training mode normalizes by batch
/// statistics over N,H,W and updates the running averages; inference mode
/// uses the stored running statistics.
inline Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats* stats,
                         bool training, double eps = 1e-5) {
    const Shape& is = input.shape();
    const std::int64_t N = is.n(), C = is.c(), H = is.h(), W = is.w();
    if (!(gamma.shape() == Shape{1, C, 1, 1}) || !(beta.shape() == Shape{1, C, 1, 1}))
        throw std::invalid_argument("batch_norm: gamma/beta channel axis must match input channels " +
                                    std::to_string(C));
    if (!training && stats == nullptr)
        throw std::invalid_argument("batch_norm: inference mode needs running statistics");

    const std::int64_t M = N * H * W;
    const double* id = input.data();
    std::vector<double> mu(static_cast<std::size_t>(C), 0.0), var(static_cast<std::size_t>(C), 0.0);

    if (training) {
        for (std::int64_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::int64_t n = 0; n < N; ++n) {
                const double* plane = id + (n * C + c) * H * W;
                for (std::int64_t i = 0; i < H * W; ++i) s += plane[i];
            }
            mu[static_cast<std::size_t>(c)] = s / static_cast<double>(M);
            double v = 0.0;
            for (std::int64_t n = 0; n < N; ++n) {
                const double* plane = id + (n * C + c) * H * W;
                for (std::int64_t i = 0; i < H * W; ++i) {
                    const double d = plane[i] - mu[static_cast<std::size_t>(c)];
                    v += d * d;
                }
            }
            var[static_cast<std::size_t>(c)] = v / static_cast<double>(M);
        }
        if (stats != nullptr) {
            double* rm = stats->running_mean.mut();
            double* rv = stats->running_var.mut();
            const double m = stats->momentum;
            for (std::int64_t c = 0; c < C; ++c) {
                rm[c] = (1.0 - m) * rm[c] + m * mu[static_cast<std::size_t>(c)];
                rv[c] = (1.0 - m) * rv[c] + m * var[static_cast<std::size_t>(c)];
            }
        }
    } else {
        const double* rm = stats->running_mean.data();
        const double* rv = stats->running_var.data();
        for (std::int64_t c = 0; c < C; ++c) {
            mu[static_cast<std::size_t>(c)] = rm[c];
            var[static_cast<std::size_t>(c)] = rv[c];
        }
    }

    Tensor xhat = Tensor::zeros(is);
    Tensor out = Tensor::zeros(is);
    std::vector<double> inv_std(static_cast<std::size_t>(C));
    for (std::int64_t c = 0; c < C; ++c)
        inv_std[static_cast<std::size_t>(c)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
    {
        double* xh = xhat.mut();
        double* o = out.mut();
        const double* gd = gamma.data();
        const double* bd = beta.data();
        for (std::int64_t n = 0; n < N; ++n) {
            for (std::int64_t c = 0; c < C; ++c) {
                const double m = mu[static_cast<std::size_t>(c)];
                const double s = inv_std[static_cast<std::size_t>(c)];
                const double gm = gd[c], bt = bd[c];
                const std::int64_t off = (n * C + c) * H * W;
                for (std::int64_t i = 0; i < H * W; ++i) {
                    const double v = (id[off + i] - m) * s;
                    xh[off + i] = v;
                    o[off + i] = gm * v + bt;
                }
            }
        }
    }

    Tape* tape = detail::op_tape({&input, &gamma, &beta});
    const int ni = input.node(), ng = gamma.node(), nb = beta.node();
    const int no = static_cast<int>(tape ? tape->size() : 0);
    Tensor gv = gamma.detached();
    detail::track(out, tape, [=](Tape& t) {
        const double* g = t.grad_buffer(no).data();
        const double* xh = xhat.data();
        const double* gd = gv.data();
        double* gi = (ni >= 0) ? t.grad_buffer(ni).mut() : nullptr;
        double* gg = (ng >= 0) ? t.grad_buffer(ng).mut() : nullptr;
        double* gb = (nb >= 0) ? t.grad_buffer(nb).mut() : nullptr;

        for (std::int64_t c = 0; c < C; ++c) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::int64_t n = 0; n < N; ++n) {
                const std::int64_t off = (n * C + c) * H * W;
                for (std::int64_t i = 0; i < H * W; ++i) {
                    sum_g += g[off + i];
                    sum_gx += g[off + i] * xh[off + i];
                }
            }
            if (gb) gb[c] += sum_g;
            if (gg) gg[c] += sum_gx;
            if (!gi) continue;
            const double s = inv_std[static_cast<std::size_t>(c)];
            const double gm = gd[c];
            if (training) {
                const double inv_m = 1.0 / static_cast<double>(M);
                for (std::int64_t n = 0; n < N; ++n) {
                    const std::int64_t off = (n * C + c) * H * W;
                    for (std::int64_t i = 0; i < H * W; ++i) {
                        const double dxhat = g[off + i] * gm;
                        gi[off + i] +=
                            s * (dxhat - inv_m * gm * sum_g - xh[off + i] * inv_m * gm * sum_gx);
                    }
                }
            } else {
                for (std::int64_t n = 0; n < N; ++n) {
                    const std::int64_t off = (n * C + c) * H * W;
                    for (std::int64_t i = 0; i < H * W; ++i) gi[off + i] += g[off + i] * gm * s;
                }
            }
        }
    });
    return out;
}

/// Bilinear resize with half-pixel centers and edge clamping. Target equal to
/// source reproduces the input bit-exactly.
inline Tensor bilinear_resize(const Tensor& input, std::int64_t target_h, std::int64_t target_w) {
    if (target_h < 1 || target_w < 1) throw std::invalid_argument("bilinear_resize: target sizes must be >= 1");
    const Shape& is = input.shape();
    const std::int64_t N = is.n(), C = is.c(), H = is.h(), W = is.w();

    auto axis_map = [](std::int64_t src, std::int64_t dst) {
        std::vector<std::int64_t> i0(static_cast<std::size_t>(dst)), i1(static_cast<std::size_t>(dst));
        std::vector<double> frac(static_cast<std::size_t>(dst));
        const double scale = static_cast<double>(src) / static_cast<double>(dst);
        for (std::int64_t d = 0; d < dst; ++d) {
            const double s = (static_cast<double>(d) + 0.5) * scale - 0.5;
            const double f = std::floor(s);
            i0[static_cast<std::size_t>(d)] = std::clamp(static_cast<std::int64_t>(f), std::int64_t{0}, src - 1);
            i1[static_cast<std::size_t>(d)] =
                std::clamp(static_cast<std::int64_t>(f) + 1, std::int64_t{0}, src - 1);
            frac[static_cast<std::size_t>(d)] = s - f;
        }
        return std::tuple{i0, i1, frac};
    };
    auto [y0, y1, fy] = axis_map(H, target_h);
    auto [x0, x1, fx] = axis_map(W, target_w);

    Tensor out = Tensor::zeros(Shape{N, C, target_h, target_w});
    double* od = out.mut();
    const double* id = input.data();
    for (std::int64_t p = 0; p < N * C; ++p) {
        const double* plane = id + p * H * W;
        double* oplane = od + p * target_h * target_w;
        for (std::int64_t ty = 0; ty < target_h; ++ty) {
            const double wy = fy[static_cast<std::size_t>(ty)];
            const double* r0 = plane + y0[static_cast<std::size_t>(ty)] * W;
            const double* r1 = plane + y1[static_cast<std::size_t>(ty)] * W;
            for (std::int64_t tx = 0; tx < target_w; ++tx) {
                const double wx = fx[static_cast<std::size_t>(tx)];
                const std::int64_t a = x0[static_cast<std::size_t>(tx)], b = x1[static_cast<std::size_t>(tx)];
                const double top = (1.0 - wx) * r0[a] + wx * r0[b];
                const double bot = (1.0 - wx) * r1[a] + wx * r1[b];
                oplane[ty * target_w + tx] = (1.0 - wy) * top + wy * bot;
            }
        }
    }

    Tape* tape = detail::op_tape({&input});
    const int ni = input.node(), no = static_cast<int>(tape ? tape->size() : 0);
    detail::track(out, tape, [=, y0 = y0, y1 = y1, fy = fy, x0 = x0, x1 = x1, fx = fx](Tape& t) {
        if (ni < 0) return;
        const double* g = t.grad_buffer(no).data();
        double* gi = t.grad_buffer(ni).mut();
        for (std::int64_t p = 0; p < N * C; ++p) {
            double* gplane = gi + p * H * W;
            const double* goplane = g + p * target_h * target_w;
            for (std::int64_t ty = 0; ty < target_h; ++ty) {
                const double wy = fy[static_cast<std::size_t>(ty)];
                double* r0 = gplane + y0[static_cast<std::size_t>(ty)] * W;
                double* r1 = gplane + y1[static_cast<std::size_t>(ty)] * W;
                for (std::int64_t tx = 0; tx < target_w; ++tx) {
                    const double wx = fx[static_cast<std::size_t>(tx)];
                    const std::int64_t a = x0[static_cast<std::size_t>(tx)],
                                       b = x1[static_cast<std::size_t>(tx)];
                    const double go = goplane[ty * target_w + tx];
                    r0[a] += (1.0 - wy) * (1.0 - wx) * go;
                    r0[b] += (1.0 - wy) * wx * go;
                    r1[a] += wy * (1.0 - wx) * go;
                    r1[b] += wy * wx * go;
                }
            }
        }
    });
    return out;
}

/// Adaptive average pooling: each output cell averages its integer sub-window.
inline Tensor avg_pool_to(const Tensor& input, std::int64_t out_h, std::int64_t out_w) {
    const Shape& is = input.shape();
    const std::int64_t N = is.n(), C = is.c(), H = is.h(), W = is.w();
    if (H < out_h || W < out_w)
        throw std::invalid_argument("avg_pool_to: input " + std::to_string(H) + "x" + std::to_string(W) +
                                    " smaller than target " + std::to_string(out_h) + "x" +
                                    std::to_string(out_w));

    auto windows = [](std::int64_t src, std::int64_t dst) {
        std::vector<std::int64_t> lo(static_cast<std::size_t>(dst)), hi(static_cast<std::size_t>(dst));
        for (std::int64_t d = 0; d < dst; ++d) {
            lo[static_cast<std::size_t>(d)] = d * src / dst;
            hi[static_cast<std::size_t>(d)] = ((d + 1) * src + dst - 1) / dst;
        }
        return std::pair{lo, hi};
    };
    auto [ylo, yhi] = windows(H, out_h);
    auto [xlo, xhi] = windows(W, out_w);

    Tensor out = Tensor::zeros(Shape{N, C, out_h, out_w});
    double* od = out.mut();
    const double* id = input.data();
    for (std::int64_t p = 0; p < N * C; ++p) {
        const double* plane = id + p * H * W;
        double* oplane = od + p * out_h * out_w;
        for (std::int64_t oy = 0; oy < out_h; ++oy) {
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
                double acc = 0.0;
                for (std::int64_t y = ylo[static_cast<std::size_t>(oy)]; y < yhi[static_cast<std::size_t>(oy)];
                     ++y)
                    for (std::int64_t x = xlo[static_cast<std::size_t>(ox)];
                         x < xhi[static_cast<std::size_t>(ox)]; ++x)
                        acc += plane[y * W + x];
                const double cnt = static_cast<double>((yhi[static_cast<std::size_t>(oy)] -
                                                        ylo[static_cast<std::size_t>(oy)]) *
                                                       (xhi[static_cast<std::size_t>(ox)] -
                                                        xlo[static_cast<std::size_t>(ox)]));
                oplane[oy * out_w + ox] = acc / cnt;
            }
        }
    }

    Tape* tape = detail::op_tape({&input});
    const int ni = input.node(), no = static_cast<int>(tape ? tape->size() : 0);
    detail::track(out, tape, [=, ylo = ylo, yhi = yhi, xlo = xlo, xhi = xhi](Tape& t) {
        if (ni < 0) return;
        const double* g = t.grad_buffer(no).data();
        double* gi = t.grad_buffer(ni).mut();
        for (std::int64_t p = 0; p < N * C; ++p) {
            double* gplane = gi + p * H * W;
            const double* goplane = g + p * out_h * out_w;
            for (std::int64_t oy = 0; oy < out_h; ++oy) {
                for (std::int64_t ox = 0; ox < out_w; ++ox) {
                    const double cnt = static_cast<double>((yhi[static_cast<std::size_t>(oy)] -
                                                            ylo[static_cast<std::size_t>(oy)]) *
                                                           (xhi[static_cast<std::size_t>(ox)] -
                                                            xlo[static_cast<std::size_t>(ox)]));
                    const double go = goplane[oy * out_w + ox] / cnt;
                    for (std::int64_t y = ylo[static_cast<std::size_t>(oy)];
                         y < yhi[static_cast<std::size_t>(oy)]; ++y)
                        for (std::int64_t x = xlo[static_cast<std::size_t>(ox)];
                             x < xhi[static_cast<std::size_t>(ox)]; ++x)
                            gplane[y * W + x] += go;
                }
            }
        }
    });
    return out;
}

/// Sum of inputs scaled by scalar weight tensors; gradient flows to both.
inline Tensor weighted_sum(const std::vector<Tensor>& inputs, const std::vector<Tensor>& weights) {
    if (inputs.empty()) throw std::invalid_argument("weighted_sum: needs at least one input");
    if (inputs.size() != weights.size())
        throw std::invalid_argument("weighted_sum: " + std::to_string(inputs.size()) + " inputs vs " +
                                    std::to_string(weights.size()) + " weights");
    for (const Tensor& x : inputs) check_same_shape(inputs.front(), x, "weighted_sum");
    for (const Tensor& w : weights)
        if (!w.is_scalar()) throw std::invalid_argument("weighted_sum: weights must be [1,1,1,1] scalars");

    const Shape sh = inputs.front().shape();
    Tensor out = Tensor::zeros(sh);
    double* od = out.mut();
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const double w = weights[k].item();
        const double* xd = inputs[k].data();
        for (std::int64_t i = 0; i < sh.numel(); ++i) od[i] += w * xd[i];
    }

    Tape* tape = nullptr;
    {
        std::vector<const Tensor*> all;
        for (const Tensor& x : inputs) all.push_back(&x);
        for (const Tensor& w : weights) all.push_back(&w);
        for (const Tensor* t : all) {
            if (!t->tracked()) continue;
            if (tape == nullptr)
                tape = t->tape();
            else if (tape != t->tape())
                throw std::invalid_argument("operands live on different tapes");
        }
    }
    std::vector<int> xn, wn;
    std::vector<Tensor> xv, wv;
    for (const Tensor& x : inputs) {
        xn.push_back(x.node());
        xv.push_back(x.detached());
    }
    for (const Tensor& w : weights) {
        wn.push_back(w.node());
        wv.push_back(w.detached());
    }
    const int no = static_cast<int>(tape ? tape->size() : 0);
    detail::track(out, tape, [no, xn, wn, xv, wv, sh](Tape& t) {
        const Tensor& g = t.grad_buffer(no);
        const double* gd = g.data();
        for (std::size_t k = 0; k < xv.size(); ++k) {
            if (xn[k] >= 0) detail::axpy_into(t, xn[k], g, wv[k].item());
            if (wn[k] >= 0) {
                double dot = 0.0;
                const double* xd = xv[k].data();
                for (std::int64_t i = 0; i < sh.numel(); ++i) dot += gd[i] * xd[i];
                t.grad_buffer(wn[k]).mut()[0] += dot;
            }
        }
    });
    return out;
}

/// Convenience overload for constant weights.
inline Tensor weighted_sum(const std::vector<Tensor>& inputs, const std::vector<double>& weights) {
    std::vector<Tensor> ws;
    ws.reserve(weights.size());
    for (double w : weights) ws.push_back(Tensor::scalar(w));
    return weighted_sum(inputs, ws);
}

/// Forward difference along the width axis; output has W-1 columns.
inline Tensor diff_x(const Tensor& a) {
    const Shape& is = a.shape();
    if (is.w() < 2) throw std::invalid_argument("diff_x: width axis must be >= 2");
    const std::int64_t P = is.n() * is.c() * is.h(), W = is.w();
    Tensor out = Tensor::zeros(Shape{is.n(), is.c(), is.h(), W - 1});
    double* od = out.mut();
    const double* id = a.data();
    for (std::int64_t p = 0; p < P; ++p)
        for (std::int64_t x = 0; x < W - 1; ++x) od[p * (W - 1) + x] = id[p * W + x + 1] - id[p * W + x];

    Tape* tape = detail::op_tape({&a});
    const int na = a.node(), no = static_cast<int>(tape ? tape->size() : 0);
    detail::track(out, tape, [na, no, P, W](Tape& t) {
        if (na < 0) return;
        const double* g = t.grad_buffer(no).data();
        double* gi = t.grad_buffer(na).mut();
        for (std::int64_t p = 0; p < P; ++p)
            for (std::int64_t x = 0; x < W - 1; ++x) {
                gi[p * W + x + 1] += g[p * (W - 1) + x];
                gi[p * W + x] -= g[p * (W - 1) + x];
            }
    });
    return out;
}

/// Forward difference along the height axis; output has H-1 rows.
inline Tensor diff_y(const Tensor& a) {
    const Shape& is = a.shape();
    if (is.h() < 2) throw std::invalid_argument("diff_y: height axis must be >= 2");
    const std::int64_t P = is.n() * is.c(), H = is.h(), W = is.w();
    Tensor out = Tensor::zeros(Shape{is.n(), is.c(), H - 1, W});
    double* od = out.mut();
    const double* id = a.data();
    for (std::int64_t p = 0; p < P; ++p)
        for (std::int64_t y = 0; y < H - 1; ++y)
            for (std::int64_t x = 0; x < W; ++x)
                od[(p * (H - 1) + y) * W + x] = id[(p * H + y + 1) * W + x] - id[(p * H + y) * W + x];

    Tape* tape = detail::op_tape({&a});
    const int na = a.node(), no = static_cast<int>(tape ? tape->size() : 0);
    detail::track(out, tape, [na, no, P, H, W](Tape& t) {
        if (na < 0) return;
        const double* g = t.grad_buffer(no).data();
        double* gi = t.grad_buffer(na).mut();
        for (std::int64_t p = 0; p < P; ++p)
            for (std::int64_t y = 0; y < H - 1; ++y)
                for (std::int64_t x = 0; x < W; ++x) {
                    gi[(p * H + y + 1) * W + x] += g[(p * (H - 1) + y) * W + x];
                    gi[(p * H + y) * W + x] -= g[(p * (H - 1) + y) * W + x];
                }
    });
    return out;
}

}  // namespace fringeforge
