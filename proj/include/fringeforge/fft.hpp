#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace fringeforge {

using cdouble = std::complex<double>;

/// Row-major complex grid for spectral work.
struct ComplexGrid {
    std::int64_t h = 0, w = 0;
    std::vector<cdouble> v;

    ComplexGrid() = default;
    ComplexGrid(std::int64_t hh, std::int64_t ww) : h(hh), w(ww), v(static_cast<std::size_t>(hh * ww)) {}

    cdouble& at(std::int64_t y, std::int64_t x) { return v[static_cast<std::size_t>(y * w + x)]; }
    const cdouble& at(std::int64_t y, std::int64_t x) const { return v[static_cast<std::size_t>(y * w + x)]; }
};

namespace detail {

inline bool is_pow2(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

/// Iterative radix-2 transform of a length-n line held in scratch.
/// sign = -1 forward, +1 inverse (unnormalized either way).
inline void fft_line(std::vector<cdouble>& a, int sign, const std::vector<cdouble>& twiddle) {
    const std::size_t n = a.size();
    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cdouble w = (sign < 0) ? twiddle[k * step] : std::conj(twiddle[k * step]);
                const cdouble u = a[i + k];
                const cdouble t = w * a[i + k + len / 2];
                a[i + k] = u + t;
                a[i + k + len / 2] = u - t;
            }
        }
    }
}

/// Forward twiddles exp(-2*pi*i*k/n) for k in [0, n/2).
inline std::vector<cdouble> make_twiddles(std::size_t n) {
    std::vector<cdouble> t(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k)
        t[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    return t;
}

inline void fft2_dir(ComplexGrid& g, int sign) {
    if (!is_pow2(g.h) || !is_pow2(g.w))
        throw std::invalid_argument("fft2: dimensions must be powers of two, got " + std::to_string(g.h) +
                                    "x" + std::to_string(g.w));
    const auto tw_row = make_twiddles(static_cast<std::size_t>(g.w));
    std::vector<cdouble> line(static_cast<std::size_t>(g.w));
    for (std::int64_t y = 0; y < g.h; ++y) {
        for (std::int64_t x = 0; x < g.w; ++x) line[static_cast<std::size_t>(x)] = g.at(y, x);
        fft_line(line, sign, tw_row);
        for (std::int64_t x = 0; x < g.w; ++x) g.at(y, x) = line[static_cast<std::size_t>(x)];
    }
    const auto tw_col = make_twiddles(static_cast<std::size_t>(g.h));
    std::vector<cdouble> col(static_cast<std::size_t>(g.h));
    for (std::int64_t x = 0; x < g.w; ++x) {
        for (std::int64_t y = 0; y < g.h; ++y) col[static_cast<std::size_t>(y)] = g.at(y, x);
        fft_line(col, sign, tw_col);
        for (std::int64_t y = 0; y < g.h; ++y) g.at(y, x) = col[static_cast<std::size_t>(y)];
    }
}

}  // namespace detail

/// Unnormalized forward 2-D DFT, power-of-two sizes only.
inline ComplexGrid fft2(const ComplexGrid& in) {
    ComplexGrid g = in;
    detail::fft2_dir(g, -1);
    return g;
}

/// Inverse 2-D DFT; divides by H*W so ifft2(fft2(x)) == x.
inline ComplexGrid ifft2(const ComplexGrid& in) {
    ComplexGrid g = in;
    detail::fft2_dir(g, +1);
    const double norm = 1.0 / static_cast<double>(g.h * g.w);
    for (cdouble& z : g.v) z *= norm;
    return g;
}

}  // namespace fringeforge
