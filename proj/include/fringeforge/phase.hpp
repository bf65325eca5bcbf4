#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "fringeforge/fft.hpp"
#include "fringeforge/random.hpp"
#include "fringeforge/tensor.hpp"

namespace fringeforge {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Row-major 2-axis real grid.
struct Grid {
    std::int64_t h = 0, w = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(std::int64_t hh, std::int64_t ww, double fill = 0.0)
        : h(hh), w(ww), v(static_cast<std::size_t>(hh * ww), fill) {}

    double& at(std::int64_t y, std::int64_t x) { return v[static_cast<std::size_t>(y * w + x)]; }
    double at(std::int64_t y, std::int64_t x) const { return v[static_cast<std::size_t>(y * w + x)]; }
    std::size_t size() const { return v.size(); }
};

/// Phase surface in radians; wrapped values live in (-pi, pi].
struct PhaseMap {
    Grid grid;
    bool wrapped = false;
};

/// Recorded fringe intensity, normalized to [0,1].
struct Interferogram {
    Grid grid;
};

/// Carrier and contrast description of one fringe style.
struct FringeSpec {
    double carrier_fx = 10.0;  // cycles per image width
    double carrier_fy = 7.0;   // cycles per image height
    double contrast = 0.45;    // b
    double background = 0.5;   // a
    double noise_sigma = 0.0;

    void validate(std::int64_t h, std::int64_t w) const {
        const double mag = std::hypot(carrier_fx, carrier_fy);
        const double limit = static_cast<double>(std::min(h, w)) / 4.0;
        if (!(mag > 4.0 && mag < limit))
            throw std::invalid_argument("carrier magnitude " + std::to_string(mag) +
                                        " must exceed 4 cycles and stay below " + std::to_string(limit));
        if (!(contrast > 0.0 && contrast <= 1.0)) throw std::invalid_argument("fringe contrast must lie in (0,1]");
        if (noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    }
};

/// System-induced phase: tilt plus a defocus-like curvature about the center.
struct AberrationSpec {
    double tilt_x = 0.0;     // rad per pixel
    double tilt_y = 0.0;     // rad per pixel
    double quadratic = 0.0;  // rad per pixel^2

    double eval(std::int64_t y, std::int64_t x, std::int64_t h, std::int64_t w) const {
        const double cx = 0.5 * static_cast<double>(w - 1);
        const double cy = 0.5 * static_cast<double>(h - 1);
        const double dx = static_cast<double>(x) - cx;
        const double dy = static_cast<double>(y) - cy;
        return tilt_x * static_cast<double>(x) + tilt_y * static_cast<double>(y) +
               quadratic * (dx * dx + dy * dy);
    }
};

/// Principal value in (-pi, pi].
inline double wrap_angle(double x) {
    double r = x - two_pi * std::round(x / two_pi);
    if (r <= -std::numbers::pi) r += two_pi;
    if (r > std::numbers::pi) r -= two_pi;
    return r;
}

inline PhaseMap wrap(const PhaseMap& p) {
    PhaseMap out{Grid(p.grid.h, p.grid.w), true};
    for (std::size_t i = 0; i < p.grid.size(); ++i) out.grid.v[i] = wrap_angle(p.grid.v[i]);
    return out;
}

/// Random field of anisotropic Gaussian blobs; the peak is rescaled below
/// max_phase and the minimum stays at zero. Deterministic in the seed.
inline PhaseMap synth_phase(std::int64_t h, std::int64_t w, int n_blobs, double max_phase = 12.0,
                            std::uint64_t seed = 0) {
    if (!detail::is_pow2(h) || !detail::is_pow2(w))
        throw std::invalid_argument("synth_phase: sizes must be powers of two");
    if (n_blobs < 0) throw std::invalid_argument("synth_phase: n_blobs must be >= 0");

    PhaseMap out{Grid(h, w), false};
    if (n_blobs == 0) return out;

    Rng rng(derive_seed(seed, 0xb10b));
    struct Blob {
        double cy, cx, s_major, s_minor, theta, amp;
    };
    std::vector<Blob> blobs;
    blobs.reserve(static_cast<std::size_t>(n_blobs));
    const double span = static_cast<double>(std::min(h, w));
    for (int i = 0; i < n_blobs; ++i) {
        Blob b;
        b.cy = rng.uniform(0.15, 0.85) * static_cast<double>(h);
        b.cx = rng.uniform(0.15, 0.85) * static_cast<double>(w);
        b.s_major = rng.uniform(span / 16.0, span / 5.0);
        b.s_minor = b.s_major / rng.uniform(1.0, 2.5);
        b.theta = rng.uniform(0.0, std::numbers::pi);
        b.amp = rng.uniform(0.35, 1.0);
        blobs.push_back(b);
    }
    const double peak_target = rng.uniform(0.55, 0.95) * max_phase;

    double peak = 0.0;
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (const Blob& b : blobs) {
                const double dy = static_cast<double>(y) - b.cy;
                const double dx = static_cast<double>(x) - b.cx;
                const double u = std::cos(b.theta) * dx + std::sin(b.theta) * dy;
                const double t = -std::sin(b.theta) * dx + std::cos(b.theta) * dy;
                acc += b.amp * std::exp(-0.5 * (u * u / (b.s_major * b.s_major) +
                                                t * t / (b.s_minor * b.s_minor)));
            }
            out.grid.at(y, x) = acc;
            peak = std::max(peak, acc);
        }
    }
    if (peak > 0.0) {
        const double s = peak_target / peak;
        for (double& v : out.grid.v) v *= s;
    }
    return out;
}

/// Encode an unwrapped phase into an off-axis fringe pattern:
/// I = a + b*cos(phi + psi_ab + carrier) + noise, affinely rescaled to [0,1]
/// by the analytic bounds a +/- b, then clipped.
inline Interferogram render_interferogram(const PhaseMap& phase, const AberrationSpec& ab,
                                          const FringeSpec& fr, std::uint64_t seed = 0) {
    if (phase.wrapped) throw std::invalid_argument("render_interferogram: phase must be unwrapped");
    const std::int64_t h = phase.grid.h, w = phase.grid.w;
    if (!detail::is_pow2(h) || !detail::is_pow2(w))
        throw std::invalid_argument("render_interferogram: sizes must be powers of two");
    if (fr.contrast <= 0.0) throw std::invalid_argument("render_interferogram: zero contrast");
    fr.validate(h, w);

    Rng rng(derive_seed(seed, 0xf12e));
    Interferogram out{Grid(h, w)};
    const double a = fr.background, b = fr.contrast;
    for (std::int64_t y = 0; y < h; ++y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const double carrier = two_pi * (fr.carrier_fx * static_cast<double>(x) / static_cast<double>(w) +
                                             fr.carrier_fy * static_cast<double>(y) / static_cast<double>(h));
            double i = a + b * std::cos(phase.grid.at(y, x) + ab.eval(y, x, h, w) + carrier);
            i = (i - (a - b)) / (2.0 * b);
            if (fr.noise_sigma > 0.0) i += rng.normal(0.0, fr.noise_sigma);
            out.grid.at(y, x) = std::clamp(i, 0.0, 1.0);
        }
    }
    return out;
}

/// Spectral argmax outside a DC exclusion disk; returns the carrier bin in the
/// half-plane with positive row frequency (row 0: positive column frequency).
inline std::pair<double, double> locate_carrier(const Interferogram& ig, double dc_exclusion = 4.0) {
    ComplexGrid f(ig.grid.h, ig.grid.w);
    for (std::size_t i = 0; i < ig.grid.size(); ++i) f.v[i] = ig.grid.v[i];
    ComplexGrid spec = fft2(f);

    auto signed_freq = [](std::int64_t k, std::int64_t n) {
        return (k <= n / 2) ? static_cast<double>(k) : static_cast<double>(k - n);
    };
    double best = -1.0;
    std::pair<double, double> bin{0.0, 0.0};
    for (std::int64_t ky = 0; ky < spec.h; ++ky) {
        for (std::int64_t kx = 0; kx < spec.w; ++kx) {
            const double fy = signed_freq(ky, spec.h), fx = signed_freq(kx, spec.w);
            if (std::hypot(fx, fy) <= dc_exclusion) continue;
            if (fy < 0.0 || (fy == 0.0 && fx < 0.0)) continue;  // keep one of the conjugate pair
            const double mag = std::abs(spec.at(ky, kx));
            if (mag > best) {
                best = mag;
                bin = {fx, fy};
            }
        }
    }
    return bin;
}

/// Fourier-transform fringe demodulation: isolate the +carrier sideband with a
/// circular mask, shift it to the origin, invert, and take the argument.
inline PhaseMap fourier_demodulate(const Interferogram& ig, const FringeSpec& fr, double window_radius = 0.0) {
    const std::int64_t h = ig.grid.h, w = ig.grid.w;
    if (window_radius <= 0.0) window_radius = static_cast<double>(std::min(h, w)) / 8.0;

    const auto kx0 = static_cast<std::int64_t>(std::llround(fr.carrier_fx));
    const auto ky0 = static_cast<std::int64_t>(std::llround(fr.carrier_fy));
    // wrapped distance from the carrier bin to DC
    auto wrapped_dist = [](std::int64_t k, std::int64_t n) {
        const std::int64_t m = ((k % n) + n) % n;
        return static_cast<double>(std::min(m, n - m));
    };
    const double dc_dist = std::hypot(wrapped_dist(kx0, w), wrapped_dist(ky0, h));
    if (dc_dist <= window_radius)
        throw std::invalid_argument("fourier_demodulate: carrier too low (sideband mask reaches DC)");

    ComplexGrid f(h, w);
    for (std::size_t i = 0; i < ig.grid.size(); ++i) f.v[i] = ig.grid.v[i];
    ComplexGrid spec = fft2(f);

    // mask around +carrier, re-centered at the origin
    ComplexGrid shifted(h, w);
    auto circ_delta = [](std::int64_t k, std::int64_t n) {
        std::int64_t d = ((k % n) + n) % n;
        if (d > n / 2) d -= n;
        return static_cast<double>(d);
    };
    for (std::int64_t ky = 0; ky < h; ++ky) {
        for (std::int64_t kx = 0; kx < w; ++kx) {
            const double dy = circ_delta(ky - ky0, h);
            const double dx = circ_delta(kx - kx0, w);
            if (std::hypot(dx, dy) > window_radius) continue;
            const std::int64_t sy = ((ky - ky0) % h + h) % h;
            const std::int64_t sx = ((kx - kx0) % w + w) % w;
            shifted.at(sy, sx) = spec.at(ky, kx);
        }
    }
    ComplexGrid field = ifft2(shifted);

    PhaseMap out{Grid(h, w), true};
    for (std::size_t i = 0; i < out.grid.size(); ++i) out.grid.v[i] = wrap_angle(std::arg(field.v[i]));
    return out;
}

/// Pointwise subtraction followed by anchoring the 1st percentile at zero.
inline PhaseMap compensate(const PhaseMap& sample, const PhaseMap& calibration) {
    if (sample.wrapped || calibration.wrapped)
        throw std::invalid_argument("compensate: both maps must be unwrapped");
    if (sample.grid.h != calibration.grid.h || sample.grid.w != calibration.grid.w)
        throw std::invalid_argument("compensate: shape mismatch " + std::to_string(sample.grid.h) + "x" +
                                    std::to_string(sample.grid.w) + " vs " +
                                    std::to_string(calibration.grid.h) + "x" +
                                    std::to_string(calibration.grid.w));

    PhaseMap out{Grid(sample.grid.h, sample.grid.w), false};
    for (std::size_t i = 0; i < out.grid.size(); ++i) out.grid.v[i] = sample.grid.v[i] - calibration.grid.v[i];

    std::vector<double> sorted = out.grid.v;
    const std::size_t idx = (sorted.size() - 1) / 100;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(idx), sorted.end());
    const double anchor = sorted[idx];
    for (double& v : out.grid.v) v -= anchor;
    return out;
}

inline Tensor grid_to_tensor(const Grid& g) {
    return Tensor(Shape{1, 1, g.h, g.w}, g.v);
}

inline Grid tensor_to_grid(const Tensor& t) {
    if (t.shape().n() != 1 || t.shape().c() != 1)
        throw std::invalid_argument("tensor_to_grid: needs [1,1,H,W], got " + t.shape().str());
    Grid g(t.shape().h(), t.shape().w());
    g.v.assign(t.data(), t.data() + t.numel());
    return g;
}

}  // namespace fringeforge
